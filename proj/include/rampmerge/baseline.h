#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rampmerge/geometry.h"
#include "rampmerge/trajectory.h"

namespace rampmerge {

struct KraussParams {
  double tau = 1.0;         // reaction time, s
  double decel = 4.5;       // b, m/s^2
  double accel = 2.0;       // a, m/s^2
  double desired_speed = 100.0 / 3.6;
  double sigma = 0.5;       // driver imperfection
  double min_gap = 2.5;     // m
};

void ValidateKraussParams(const KraussParams& p);

struct BaselineParams {
  KraussParams krauss;
  double step_ratio = 0.5;  // dt = step_ratio * tau
  double tau_lead = 1.0;    // gap acceptance headway to the lead vehicle, s
  double tau_lag = 1.0;     // gap acceptance headway to the lag vehicle, s
};

// Largest speed that still lets the follower stop behind a leader braking at
// the same rate. Infinite without a leader.
double KraussSafeSpeed(double v_leader, double gap, const KraussParams& p);

// One synchronous update. `gap` is the bumper gap to the leader; noise is a
// unit-interval draw. Throws kNegativeGap when the vehicles overlap.
double KraussStep(double v, std::optional<double> v_leader, double gap,
                  const KraussParams& p, double dt, double noise);

// Convenience overload over full states; the gap is measured bumper to bumper.
double KraussStep(const VehicleState& follower,
                  const std::optional<VehicleState>& leader,
                  const KraussParams& p, double vehicle_length, double dt,
                  double noise);

enum class MergeDecision { kMergeNow, kWait };

MergeDecision GapAcceptanceMerge(const VehicleState& ramp_vehicle,
                                 const std::optional<VehicleState>& lead,
                                 const std::optional<VehicleState>& lag,
                                 const BaselineParams& p,
                                 double vehicle_length);

struct BaselineArrival {
  VehicleId id;
  VehicleClass vehicle_class = VehicleClass::kMainline;
  Lane lane;
  double time = 0.0;
};

struct BaselineVehicleResult {
  VehicleId id;
  VehicleClass vehicle_class = VehicleClass::kMainline;
  double scheduled_entry = 0.0;
  bool entered = false;
  bool completed = false;
  std::optional<Trajectory> trajectory;
};

struct BaselineFault {
  double time = 0.0;
  VehicleId follower;
  VehicleId leader;
  double gap = 0.0;
};

struct BaselineResult {
  std::vector<BaselineVehicleResult> vehicles;  // arrival order
  std::vector<BaselineFault> faults;
  std::vector<std::pair<double, VehicleId>> merges;
  double end_time = 0.0;
};

// Discrete-time run of the uncoordinated model. Stops once every arrival has
// left the section or at `time_limit`; vehicles still inside are returned
// with completed = false.
BaselineResult RunBaseline(const std::vector<BaselineArrival>& arrivals,
                           const RoadGeometry& geom, const ClassParams& params,
                           const BaselineParams& bp, std::uint64_t seed,
                           double time_limit);

}  // namespace rampmerge
