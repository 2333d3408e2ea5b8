#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rampmerge/geometry.h"
#include "rampmerge/safety.h"
#include "rampmerge/trajectory.h"

namespace rampmerge {

enum class Strategy { kMainlinePriority, kRampPriority, kBaseline };

std::string_view StrategyName(Strategy s);
std::optional<Strategy> ParseStrategy(std::string_view name);

struct PlannerParams {
  double plan_lead_time = 1.0;        // report time to horizon start, s
  double ramp_adjust_decel = 1.0;     // m/s^2
  double mainline_adjust_rate = 1.0;  // m/s^2
  double ramp_min_speed_ratio = 0.5;  // v_ramp_min = ratio * vr0
  double mainline_min_speed = 50.0 / 3.6;
  int cascade_cap = 10;
  int gap_search_radius = 1;
  double planning_margin = 0.05;  // m, added to the requirement while planning
  double max_ramp_wait = 120.0;   // s, longest stop at the ramp end
};

struct PlanningContext {
  RoadGeometry geometry;
  ClassParams params;
  SafetyParams safety;
  UrgencyParams urgency;
  PlannerParams planner;
};

struct SceneVehicle {
  Trajectory committed;
  VehicleClass vehicle_class = VehicleClass::kMainline;
  double free_flow_exit = 0.0;
  double adjustable_from = 0.0;  // earliest time its motion may change
};

struct MergeScene {
  PlanningContext ctx;
  std::vector<SceneVehicle> vehicles;  // leader first
  VehicleState ramp_entry;
  Trajectory ramp_free_flow;
  double horizon_start = 0.0;
};

struct CommittedVehicle {
  Trajectory trajectory;
  VehicleClass vehicle_class = VehicleClass::kMainline;
  double free_flow_exit = 0.0;
};

// Assembles a scene for the ramp vehicle reporting at its entry time.
// Vehicles are sorted leader first by station at the report time.
MergeScene MakeMergeScene(const PlanningContext& ctx,
                          std::vector<CommittedVehicle> vehicles,
                          VehicleId ramp_id, double report_time);

struct TargetGapChoice {
  std::optional<VehicleId> leader_id;    // none: merge ahead of everyone
  std::optional<VehicleId> follower_id;  // none: merge behind everyone
  double gap_length_at_merge = 0.0;
  bool adequate = false;  // usable without moving any mainline vehicle
  bool requires_mainline_adjustment = false;
};

enum class PlanStrategy {
  kNoneNeeded,
  kMainlinePriority,
  kRampPriority,
  kRampYield,  // ramp vehicle waits for a clear slot, nobody else moves
};

std::string_view PlanStrategyName(PlanStrategy s);

struct Plan {
  PlanStrategy strategy = PlanStrategy::kNoneNeeded;
  std::map<VehicleId, Trajectory> assignments;
  double merge_time = 0.0;
  double merge_station = 0.0;
  double total_adjustment_cost = 0.0;
  std::optional<TargetGapChoice> gap;
  // Set when the configured strategy could not produce a plan.
  std::string fallback_reason;
};

double MinimumMergeGap(const ClassParams& params, double v_merge,
                       double v_mainline, const SafetyParams& p);

// Ramp vehicle against the scene: post-merge mainline conflicts plus conflicts
// with other vehicles in the ramp corridor.
std::vector<Conflict> SceneConflicts(const MergeScene& scene,
                                     const Trajectory& ramp);

Plan Decide(const MergeScene& scene,
            Strategy strategy = Strategy::kMainlinePriority);

TargetGapChoice SelectTargetGap(const MergeScene& scene,
                                const std::vector<Conflict>& conflicts);

Plan PlanMainlinePriority(const MergeScene& scene,
                          const TargetGapChoice& choice);

Plan PlanRampPriority(const MergeScene& scene,
                      const std::vector<Conflict>& conflicts);

Plan PlanRampYield(const MergeScene& scene);

// Decide() with fallbacks: when the configured strategy reports
// kNoFeasibleGap or kBoundsViolation the other cooperative strategy is tried,
// then the ramp vehicle yields.
Plan ResolveMerge(const MergeScene& scene, Strategy strategy);

// Coordinated ramp trajectory with lateness parameter q >= 0: speeds down to
// vr0 - q on the ramp, and beyond the slowest cruise speed stops at the ramp
// end for the excess in seconds. nullopt when the profile is not drivable.
std::optional<Trajectory> RampCandidate(const MergeScene& scene, double q);

}  // namespace rampmerge
