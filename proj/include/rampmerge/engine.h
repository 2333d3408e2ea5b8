#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rampmerge/baseline.h"
#include "rampmerge/coordination.h"
#include "rampmerge/geometry.h"
#include "rampmerge/planner.h"
#include "rampmerge/safety.h"
#include "rampmerge/trajectory.h"

namespace rampmerge {

struct ScriptedArrival {
  double time = 0.0;
  VehicleClass vehicle_class = VehicleClass::kMainline;
  int lane = 0;
};

struct ScenarioConfig {
  GeometryConfig geometry;
  ClassParams params;
  SafetyParams safety;
  UrgencyParams urgency;
  PlannerParams planner;
  CoordinationParams coordination;
  BaselineParams baseline;

  double mainline_volume = 1200.0;  // veh/h/lane
  double ramp_volume = 300.0;       // veh/h
  Strategy strategy = Strategy::kMainlinePriority;
  double duration = 900.0;
  double warmup = 300.0;
  std::uint64_t seed = 1;
  double sample_dt = 0.1;
  double drain_limit = 1800.0;  // baseline stops this long after `duration`
  bool use_protocol = true;

  // Explicit entry list; when non-empty it replaces the Poisson streams.
  std::vector<ScriptedArrival> script;
};

void ValidateScenario(const ScenarioConfig& config);

PlanningContext MakePlanningContext(const ScenarioConfig& config);

struct Arrival {
  VehicleId id;
  VehicleClass vehicle_class = VehicleClass::kMainline;
  Lane lane;
  double time = 0.0;
};

// Shortest entry headway that keeps two cruising vehicles safely apart.
double MinimumEntryHeadway(double speed, const ClassParams& params,
                           const SafetyParams& safety);

// Exponential headways with mean 3600/volume over [0, horizon). A draw that
// would violate `min_headway` is pushed back to exactly min_headway after
// its predecessor.
std::vector<double> PoissonSchedule(double volume, double min_headway,
                                    double horizon, std::uint64_t seed);

// Ids are assigned in time order starting at 1; same seed, same schedule.
std::vector<Arrival> GenerateArrivals(const ScenarioConfig& config,
                                      std::uint64_t seed);

struct VehicleRecord {
  VehicleId id;
  VehicleClass vehicle_class = VehicleClass::kMainline;
  Lane entry_lane;
  double scheduled_entry = 0.0;
  double entry_time = 0.0;
  double exit_time = 0.0;
  double free_flow_exit = 0.0;
  bool measured = false;
  bool completed = false;
  std::optional<Trajectory> trajectory;
};

struct TimelineEvent {
  double time = 0.0;
  std::string type;
  VehicleId vehicle_id;
  nlohmann::json detail = nlohmann::json::object();
};

struct StateSample {
  double time = 0.0;
  VehicleId vehicle_id;
  VehicleClass vehicle_class = VehicleClass::kMainline;
  Lane lane;
  double station = 0.0;
  double speed = 0.0;
};

struct Timeline {
  Strategy strategy = Strategy::kMainlinePriority;
  std::vector<VehicleRecord> records;  // id order
  std::vector<TimelineEvent> events;   // time order
  MessageBus messages;
  double sample_dt = 0.1;
  double end_time = 0.0;
  int fault_count = 0;

  // Visits every vehicle state at multiples of sample_dt, time-major and in
  // id order within one instant.
  void ForEachSample(const std::function<void(const StateSample&)>& fn) const;
  std::vector<StateSample> Samples() const;
};

Timeline Run(const ScenarioConfig& config);

// Every arrival on its free-flow law with nothing planned; the "before"
// picture of a scenario. Conflicts are left in place.
Timeline RunFreeFlow(const ScenarioConfig& config);

struct SafetyAudit {
  double min_separation = std::numeric_limits<double>::infinity();
  long violations = 0;  // below the cooperative safety distance - 1e-6
  long pairs_checked = 0;
  double worst_shortfall = 0.0;
};

// Consecutive same-stream pairs at every sample instant.
SafetyAudit AuditSamples(const Timeline& timeline, const SafetyParams& p,
                         double vehicle_length);

}  // namespace rampmerge
