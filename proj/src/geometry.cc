#include "rampmerge/geometry.h"

#include <fmt/format.h>

#include "rampmerge/errors.h"

namespace rampmerge {

RoadGeometry BuildGeometry(const GeometryConfig& config) {
  auto require_positive = [](double value, const char* name) {
    if (!(value > 0.0)) {
      throw MergeError(ErrorCode::kNonPositiveLength,
                       fmt::format("{} must be > 0 (got {})", name, value));
    }
  };
  require_positive(config.mainline_length, "mainline_length");
  require_positive(config.ramp_length, "ramp_length");
  require_positive(config.accel_lane_length, "accel_lane_length");
  if (config.mainline_lane_count < 1) {
    throw MergeError(ErrorCode::kInvalidArgument,
                     fmt::format("mainline_lane_count must be >= 1 (got {})",
                                 config.mainline_lane_count));
  }
  if (config.accel_lane_start < 0.0) {
    throw MergeError(ErrorCode::kInvalidArgument,
                     "accel_lane_start must lie on the mainline stationing");
  }

  RoadGeometry geom;
  geom.mainline_length = config.mainline_length;
  geom.mainline_lane_count = config.mainline_lane_count;
  geom.ramp_length = config.ramp_length;
  geom.accel_lane_start = config.accel_lane_start;
  geom.accel_lane_length = config.accel_lane_length;
  geom.merge_point = config.accel_lane_start + config.accel_lane_length;
  if (geom.merge_point >= geom.mainline_length) {
    throw MergeError(
        ErrorCode::kMergeBeyondMainline,
        fmt::format("merge point {} m is not before mainline end {} m",
                    geom.merge_point, geom.mainline_length));
  }
  return geom;
}

}  // namespace rampmerge
