#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rampmerge/geometry.h"

namespace rampmerge {

struct VehicleId {
  std::int64_t value = 0;

  auto operator<=>(const VehicleId&) const = default;
};

enum class VehicleClass { kMainline, kRamp };

std::string_view VehicleClassName(VehicleClass cls);
std::optional<VehicleClass> ParseVehicleClass(std::string_view name);

enum class LaneKind { kRamp, kAcceleration, kMainline };

struct Lane {
  LaneKind kind = LaneKind::kMainline;
  int index = 0;  // mainline lane number; 0 is the lane next to the ramp

  static Lane Ramp() { return {LaneKind::kRamp, 0}; }
  static Lane Acceleration() { return {LaneKind::kAcceleration, 0}; }
  static Lane Mainline(int index) { return {LaneKind::kMainline, index}; }

  bool operator==(const Lane&) const = default;
};

// "ramp", "accel", "main0", "main1", ...
std::string LaneName(Lane lane);
std::optional<Lane> ParseLane(std::string_view name);

// Vehicles in the same stream must keep the cooperative safety distance. The
// ramp and its acceleration lane form a single stream.
bool SameStream(Lane a, Lane b);

struct VehicleState {
  VehicleId id;
  VehicleClass vehicle_class = VehicleClass::kMainline;
  Lane lane;
  double station = 0.0;
  double speed = 0.0;
  double accel = 0.0;
  double entry_time = 0.0;
};

// Class-typical kinematics. Speeds in m/s, accelerations in m/s^2.
struct ClassParams {
  double v0 = 100.0 / 3.6;   // mainline cruise
  double vr0 = 60.0 / 3.6;   // ramp cruise
  double a_r = 2.0;          // acceleration-lane rate
  double a_max = 2.5;
  double a_min = -3.0;
  double v_max = 120.0 / 3.6;
  double vehicle_length = 5.0;
  double ramp_speed_limit = 0.0;  // 0 disables the check
};

void ValidateClassParams(const ClassParams& params);

struct MotionLimits {
  double v_min = 0.0;
  double v_max = 0.0;
  double a_min = 0.0;
  double a_max = 0.0;
};

MotionLimits LimitsFor(const ClassParams& params);

struct Segment {
  double start_time = 0.0;
  double start_station = 0.0;
  double start_speed = 0.0;
  double accel = 0.0;
  double duration = 0.0;

  double end_time() const { return start_time + duration; }
  double end_station() const {
    return start_station + start_speed * duration +
           0.5 * accel * duration * duration;
  }
  double end_speed() const { return start_speed + accel * duration; }
  double StationAt(double t) const {
    const double tau = t - start_time;
    return start_station + start_speed * tau + 0.5 * accel * tau * tau;
  }
  double SpeedAt(double t) const {
    return start_speed + accel * (t - start_time);
  }
};

struct LaneInterval {
  double begin = 0.0;
  double end = 0.0;
  Lane lane;
};

// Cooperative trajectories are speed-continuous. Discrete-time baseline runs
// execute piecewise-constant speeds, so only time and station are contiguous.
enum class SpeedContinuity { kContinuous, kStepwise };

// Piecewise constant-acceleration station-vs-time law for one vehicle.
// Immutable once constructed; the constructor validates contiguity.
class Trajectory {
 public:
  static constexpr double kContiguityTolerance = 1e-9;

  Trajectory(VehicleId id, std::vector<Segment> segments,
             std::vector<LaneInterval> lanes,
             SpeedContinuity continuity = SpeedContinuity::kContinuous);

  VehicleId id() const { return id_; }
  const std::vector<Segment>& segments() const { return segments_; }
  const std::vector<LaneInterval>& lane_schedule() const { return lanes_; }
  SpeedContinuity continuity() const { return continuity_; }

  double EntryTime() const { return segments_.front().start_time; }
  double ExitTime() const { return segments_.back().end_time(); }
  double EntryStation() const { return segments_.front().start_station; }
  double ExitStation() const { return segments_.back().end_station(); }
  double EntrySpeed() const { return segments_.front().start_speed; }

  // Exact evaluation; throws kOutOfDomain outside [EntryTime, ExitTime].
  double StationAt(double t) const;
  double SpeedAt(double t) const;
  double AccelAt(double t) const;
  Lane LaneAt(double t) const;

  // Inverse of StationAt. Throws kOutOfDomain outside the station range and
  // kStalledAtStation when the vehicle stands still at s over an interval.
  double TimeAtStation(double s) const;

  // First instant the vehicle enters a mainline lane, if it ever changes lanes.
  std::optional<double> MergeTime() const;
  std::optional<double> MergeStation() const;

  // Same motion, every time shifted by dt.
  Trajectory Shifted(double dt) const;

  // Continuous extension used for ordering vehicles at a common instant:
  // linear extrapolation before entry and after exit.
  double ExtrapolatedStation(double t) const;

  // Index of the segment governing time t (t clamped into the domain).
  std::size_t SegmentIndexAt(double t) const;

 private:
  void CheckDomain(double t) const;

  VehicleId id_;
  std::vector<Segment> segments_;
  std::vector<LaneInterval> lanes_;
  SpeedContinuity continuity_;
};

// Free movement: mainline vehicles cruise at v0 to the end of the section;
// ramp vehicles cruise at vr0 to the end of the ramp, accelerate at a_r until
// v0 and change to mainline lane 0 at that station.
Trajectory FreeFlowTrajectory(const VehicleState& entry,
                              const RoadGeometry& geom,
                              const ClassParams& params);

// Shape of a coordinated ramp trajectory. With cruise_speed == vr0 and no stop
// it reproduces free flow.
struct RampProfile {
  double adjust_start = 0.0;   // earliest time the speed change may begin
  double cruise_speed = 0.0;   // speed held on the rest of the ramp
  double adjust_decel = 1.0;   // magnitude of the ramp deceleration
  double stop_wait = -1.0;     // >= 0: stop at the ramp end and wait this long
};

Trajectory BuildRampTrajectory(VehicleId id, double entry_time,
                               const RoadGeometry& geom,
                               const ClassParams& params,
                               const RampProfile& profile);

// Additive acceleration change: `accel` is added over [start_time,
// start_time + duration], nothing during the hold, then `recovery_accel` over
// the recovery window. Everything after start_time is re-integrated and the
// trajectory still ends at its original exit station.
struct SpeedAdjustment {
  double start_time = 0.0;
  double accel = 0.0;
  double duration = 0.0;
  double hold_duration = 0.0;
  double recovery_accel = 0.0;
  double recovery_duration = 0.0;

  SpeedAdjustment Inverse() const;
};

Trajectory RetimeWithSpeedAdjustment(const Trajectory& traj,
                                     const SpeedAdjustment& adj,
                                     const MotionLimits& limits);

// Largest per-segment contiguity residual over time, station and speed.
double ContiguityResidual(const Trajectory& traj);

}  // namespace rampmerge

template <>
struct std::hash<rampmerge::VehicleId> {
  std::size_t operator()(const rampmerge::VehicleId& id) const noexcept {
    return std::hash<std::int64_t>{}(id.value);
  }
};
