#pragma once

#include <doctest.h>

#include <optional>

#include "irisnet/error.hpp"

namespace irisnet::testing {

// Code of the irisnet::Error thrown by f, or nullopt when nothing is thrown.
template <typename F>
std::optional<ErrorCode> error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace irisnet::testing

#define CHECK_ERROR(expr, code) CHECK(::irisnet::testing::error_of([&] { (void)(expr); }) == (code))
