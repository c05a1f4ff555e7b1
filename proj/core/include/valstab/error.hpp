#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace valstab {

enum class ErrorCode {
  kInvalidArgument,
  kMissingPersonaName,
  kTransport,
  kRateLimited,
  kMalformedResponse,
  kUnsupportedByEndpoint,
  kExtractionFailed,
  kInsufficientData,
  kDegenerateColumn,
  kDegenerateProfile,
  kTooFewSamples,
  kOutOfRange,
  kUnknownRecipe,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI, the run orchestrator) can decide whether to retry, skip
/// a cell, or abort.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace valstab
