#pragma once

namespace rampmerge {

// Raw layout as read from a scenario config. All values in meters.
struct GeometryConfig {
  double mainline_length = 3000.0;
  int mainline_lane_count = 1;
  double ramp_length = 300.0;
  // Station where the ramp ends and the acceleration lane begins.
  double accel_lane_start = 1000.0;
  double accel_lane_length = 200.0;
};

// One-dimensional stationed layout. Ramp and mainline share the station frame,
// so equal station means equal longitudinal position. Only mainline lane 0 is
// adjacent to the acceleration lane.
struct RoadGeometry {
  double mainline_length = 0.0;
  int mainline_lane_count = 1;
  double ramp_length = 0.0;
  double accel_lane_start = 0.0;
  double accel_lane_length = 0.0;
  double merge_point = 0.0;
  double mainline_entry_station = 0.0;

  // Station at which ramp vehicles enter the section.
  double ramp_origin() const { return accel_lane_start - ramp_length; }
};

RoadGeometry BuildGeometry(const GeometryConfig& config);

}  // namespace rampmerge
