#include "ame/error.hpp"

namespace ame {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kWriteFailed: return "WriteFailed";
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kNonBinaryTreatment: return "NonBinaryTreatment";
    case ErrorCode::kUnparseableOutcome: return "UnparseableOutcome";
    case ErrorCode::kMalformedCsv: return "MalformedCsv";
    case ErrorCode::kEmptyTable: return "EmptyTable";
    case ErrorCode::kAllRowsDropped: return "AllRowsDropped";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kHoldoutTooSmall: return "HoldoutTooSmall";
    case ErrorCode::kEmptyArm: return "EmptyArm";
    case ErrorCode::kNoAvailableUnits: return "NoAvailableUnits";
    case ErrorCode::kNoMatches: return "NoMatches";
    case ErrorCode::kUnitUnmatched: return "UnitUnmatched";
    case ErrorCode::kUnfitted: return "UnfittedHandle";
    case ErrorCode::kPredictorFailure: return "PredictorFailure";
  }
  return "Unknown";
}

ErrorCategory error_category(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kUnfitted:
      return ErrorCategory::kUsage;
    case ErrorCode::kIo:
    case ErrorCode::kMissingColumn:
    case ErrorCode::kNonBinaryTreatment:
    case ErrorCode::kUnparseableOutcome:
    case ErrorCode::kMalformedCsv:
    case ErrorCode::kEmptyTable:
    case ErrorCode::kAllRowsDropped:
    case ErrorCode::kSchemaMismatch:
    case ErrorCode::kHoldoutTooSmall:
    case ErrorCode::kEmptyArm:
      return ErrorCategory::kData;
    case ErrorCode::kWriteFailed:
    case ErrorCode::kNoAvailableUnits:
    case ErrorCode::kNoMatches:
    case ErrorCode::kUnitUnmatched:
    case ErrorCode::kPredictorFailure:
      return ErrorCategory::kRuntime;
  }
  return ErrorCategory::kRuntime;
}

}  // namespace ame
