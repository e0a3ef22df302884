#include "irisnet/error.hpp"

namespace irisnet {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNotScalar: return "NotScalar";
    case ErrorCode::kInvalidGeometry: return "InvalidGeometry";
    case ErrorCode::kDegenerateBatch: return "DegenerateBatch";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kEmptySplit: return "EmptySplit";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kUnreadableImage: return "UnreadableImage";
    case ErrorCode::kInsufficientClassSamples: return "InsufficientClassSamples";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kVersionUnsupported: return "VersionUnsupported";
    case ErrorCode::kCorruptPayload: return "CorruptPayload";
    case ErrorCode::kSpecMismatch: return "SpecMismatch";
    case ErrorCode::kUnknownPrefix: return "UnknownPrefix";
    case ErrorCode::kWindowOutOfBounds: return "WindowOutOfBounds";
    case ErrorCode::kManifestMismatch: return "ManifestMismatch";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

void raise(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace irisnet
