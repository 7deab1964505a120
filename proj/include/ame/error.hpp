#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ame {

// Error categories map onto the C API status codes and the CLI exit codes:
// usage errors are configuration problems, data errors come from the input
// tables, runtime errors come from running a matcher.
enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kWriteFailed,
  kMissingColumn,
  kNonBinaryTreatment,
  kUnparseableOutcome,
  kMalformedCsv,
  kEmptyTable,
  kAllRowsDropped,
  kSchemaMismatch,
  kHoldoutTooSmall,
  kEmptyArm,
  kNoAvailableUnits,
  kNoMatches,
  kUnitUnmatched,
  kUnfitted,
  kPredictorFailure,
};

enum class ErrorCategory { kUsage, kData, kRuntime };

std::string_view error_code_name(ErrorCode code) noexcept;
ErrorCategory error_category(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ame
