#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rampmerge {

enum class ErrorCode {
  kNonPositiveLength,
  kMergeBeyondMainline,
  kAccelLaneTooShort,
  kOutOfDomain,
  kStalledAtStation,
  kBoundsViolation,
  kWindowTooShort,
  kNoFeasibleGap,
  kLateAssignment,
  kNegativeGap,
  kSimulationFault,
  kEmptyStream,
  kIncompleteMatrix,
  kConfigParse,
  kMalformedTimeline,
  kInvalidArgument,
};

std::string_view ErrorCodeName(ErrorCode code);

// Single exception type for the library; callers branch on code().
class MergeError : public std::runtime_error {
 public:
  MergeError(ErrorCode code, const std::string& what);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rampmerge
