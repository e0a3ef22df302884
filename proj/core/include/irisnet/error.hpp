#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace irisnet {

enum class ErrorCode {
  kShapeMismatch,
  kNotScalar,
  kInvalidGeometry,
  kDegenerateBatch,
  kInvalidSpec,
  kLabelOutOfRange,
  kEmptySplit,
  kEmptyCorpus,
  kUnreadableImage,
  kInsufficientClassSamples,
  kIoFailure,
  kBadMagic,
  kVersionUnsupported,
  kCorruptPayload,
  kSpecMismatch,
  kUnknownPrefix,
  kWindowOutOfBounds,
  kManifestMismatch,
  kInvalidArgument,
};

std::string_view error_code_name(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so that
// callers (the CLI in particular) can map them without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message);

}  // namespace irisnet
