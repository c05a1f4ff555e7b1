#include "valstab/error.hpp"

namespace valstab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMissingPersonaName: return "MissingPersonaName";
    case ErrorCode::kTransport: return "Transport";
    case ErrorCode::kRateLimited: return "RateLimited";
    case ErrorCode::kMalformedResponse: return "MalformedResponse";
    case ErrorCode::kUnsupportedByEndpoint: return "UnsupportedByEndpoint";
    case ErrorCode::kExtractionFailed: return "ExtractionFailed";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kDegenerateColumn: return "DegenerateColumn";
    case ErrorCode::kDegenerateProfile: return "DegenerateProfile";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kUnknownRecipe: return "UnknownRecipe";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace valstab
