#include "rampmerge/errors.h"

namespace rampmerge {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonPositiveLength: return "NonPositiveLength";
    case ErrorCode::kMergeBeyondMainline: return "MergeBeyondMainline";
    case ErrorCode::kAccelLaneTooShort: return "AccelLaneTooShort";
    case ErrorCode::kOutOfDomain: return "OutOfDomain";
    case ErrorCode::kStalledAtStation: return "StalledAtStation";
    case ErrorCode::kBoundsViolation: return "BoundsViolation";
    case ErrorCode::kWindowTooShort: return "WindowTooShort";
    case ErrorCode::kNoFeasibleGap: return "NoFeasibleGap";
    case ErrorCode::kLateAssignment: return "LateAssignment";
    case ErrorCode::kNegativeGap: return "NegativeGap";
    case ErrorCode::kSimulationFault: return "SimulationFault";
    case ErrorCode::kEmptyStream: return "EmptyStream";
    case ErrorCode::kIncompleteMatrix: return "IncompleteMatrix";
    case ErrorCode::kConfigParse: return "ConfigParseError";
    case ErrorCode::kMalformedTimeline: return "MalformedTimeline";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

MergeError::MergeError(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + what),
      code_(code) {}

}  // namespace rampmerge
