#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "rampmerge/geometry.h"
#include "rampmerge/trajectory.h"

namespace rampmerge {

struct SafetyParams {
  double d0 = 2.0;            // standstill margin, m
  double b_max = 4.0;         // braking capability, m/s^2
  double gps_error = 0.5;     // per-vehicle position bound, m
  double clock_error = 0.01;  // synchronization bound, s
  double sampling_tolerance = 1e-6;
};

void ValidateSafetyParams(const SafetyParams& p);

struct UrgencyParams {
  double t_pulse = 0.1;  // crash pulse duration, s
};

// Bumper-to-bumper distance the follower must keep behind the leader.
double CooperativeSafetyDistance(double v_follower, double v_leader,
                                 const SafetyParams& p);

// Product of the impact-severity and avoidance decelerations. Zero for an
// opening pair; +infinity once the vehicles overlap (gap <= 0).
double ConflictUrgency(double gap, double v_rel, const UrgencyParams& p);

struct Conflict {
  VehicleId ramp_vehicle_id;
  VehicleId mainline_vehicle_id;
  double first_violation_time = 0.0;
  double min_separation = 0.0;       // bumper gap at the worst instant
  double required_separation = 0.0;  // safety distance at that instant
  double urgency = 0.0;
};

// Violation found between two arbitrary trajectories sharing a stream.
struct PairViolation {
  VehicleId first;
  VehicleId second;
  double first_violation_time = 0.0;
  double worst_time = 0.0;
  double min_margin = 0.0;  // separation minus requirement at worst_time
  double separation = 0.0;
  double required = 0.0;
  double urgency = 0.0;
};

struct PairCheckOptions {
  double window_start = -std::numeric_limits<double>::infinity();
  double window_end = std::numeric_limits<double>::infinity();
  // Added to the requirement; planners use a small positive value so their
  // output clears the exact check with room to spare.
  double extra_margin = 0.0;
};

// Exact analysis over every interval where both vehicles are in the same
// stream. Returns nullopt when the separation never drops below the
// requirement.
std::optional<PairViolation> CheckPair(const Trajectory& a,
                                       const Trajectory& b,
                                       double vehicle_length,
                                       const SafetyParams& p,
                                       const UrgencyParams& up = {},
                                       const PairCheckOptions& opts = {});

// Smallest separation-minus-requirement over the shared same-stream window,
// or +infinity when the pair never shares a stream.
double MinimumMargin(const Trajectory& a, const Trajectory& b,
                     double vehicle_length, const SafetyParams& p,
                     const PairCheckOptions& opts = {});

// Ramp vehicle against the mainline after its merge. Sorted by first
// violation time, then mainline id. Throws kWindowTooShort when a mainline
// trajectory ends before the ramp vehicle merges.
std::vector<Conflict> DetectConflicts(const Trajectory& ramp,
                                      std::span<const Trajectory> mainline,
                                      const RoadGeometry& geom,
                                      const SafetyParams& p,
                                      const ClassParams& params,
                                      const UrgencyParams& up = {});

// Every pair in the set, same-stream intervals only.
std::vector<PairViolation> DetectAllConflicts(
    std::span<const Trajectory> trajs, double vehicle_length,
    const SafetyParams& p, const UrgencyParams& up = {},
    const PairCheckOptions& opts = {});

}  // namespace rampmerge
