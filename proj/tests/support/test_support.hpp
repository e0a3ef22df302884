#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "irisnet/random.hpp"
#include "irisnet/tensor.hpp"

namespace irisnet::testing {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool grad = false) {
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return Tensor(shape, std::move(v), grad);
}

// Values at least `margin` away from zero, for ops with a kink there.
inline Tensor random_away_from_zero(const Shape& shape, Rng& rng, double margin = 1e-2) {
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) {
    const double mag = rng.uniform(margin, 1.0);
    x = static_cast<float>(rng.bernoulli(0.5) ? mag : -mag);
  }
  return Tensor(shape, std::move(v));
}

inline bool bit_equal(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::uint32_t x, y;
    std::memcpy(&x, &a[i], 4);
    std::memcpy(&y, &b[i], 4);
    if (x != y) return false;
  }
  return true;
}

inline double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

// Direct quadruple loop over output positions, accumulated in double.
inline std::vector<double> naive_conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, std::size_t stride,
                                        std::size_t pad) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t oc = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
  std::vector<double> out(n * oc * oh * ow, 0.0);
  const auto X = x.data();
  const auto W = w.data();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < oc; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double s = bias ? double(bias->data()[o]) : 0.0;
          for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t p = 0; p < kh; ++p)
              for (std::size_t q = 0; q < kw; ++q) {
                const long y = long(i * stride + p) - long(pad);
                const long xx = long(j * stride + q) - long(pad);
                if (y < 0 || xx < 0 || y >= long(h) || xx >= long(wd)) continue;
                s += double(X[((b * c + ci) * h + std::size_t(y)) * wd + std::size_t(xx)]) *
                     double(W[((o * c + ci) * kh + p) * kw + q]);
              }
          out[((b * oc + o) * oh + i) * ow + j] = s;
        }
  return out;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "irisnet") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace irisnet::testing
