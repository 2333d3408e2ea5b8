#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rampmerge/planner.h"
#include "rampmerge/trajectory.h"

namespace rampmerge {

enum class Intent { kContinueMainline, kMergeFromRamp };

std::string_view IntentName(Intent intent);

struct StatusReport {
  VehicleId vehicle_id;
  double timestamp = 0.0;
  double station = 0.0;
  double speed = 0.0;
  Lane lane;

  bool operator==(const StatusReport&) const = default;
};

struct IntentReport {
  VehicleId vehicle_id;
  Intent intent = Intent::kContinueMainline;
  double desired_speed = 0.0;

  bool operator==(const IntentReport&) const = default;
};

struct VehicleReport {
  StatusReport status;
  IntentReport intent;
};

struct TrajectoryAssignment {
  VehicleId vehicle_id;
  Trajectory trajectory;
  double issue_time = 0.0;
  double planning_horizon_start = 0.0;
};

struct CoordinationParams {
  double processing_latency = 0.02;  // s
  double transmission_delay = 0.03;  // s
};

// Snapshot of a vehicle as its on-board unit reports it. No noise is added;
// position and clock uncertainty live in the safety distance instead.
VehicleReport ObuReport(const VehicleState& state, double time,
                        const ClassParams& params);

std::string EncodeReport(const VehicleReport& report);
VehicleReport DecodeReport(std::string_view text);

// 64-bit FNV-1a, used to fingerprint message payloads in the log.
std::uint64_t Fnv1a(std::string_view data);

// Canonical text of a trajectory; equal text means bit-equal segments.
std::string TrajectoryPayload(const Trajectory& traj);

struct LoggedMessage {
  std::string type;  // "status", "intent" or "assignment"
  VehicleId vehicle_id;
  double sent_time = 0.0;
  double effective_time = 0.0;
  std::uint64_t digest = 0;
};

// In-process message bus; keeps an ordered, timestamped log.
class MessageBus {
 public:
  void Post(LoggedMessage msg) { log_.push_back(std::move(msg)); }
  const std::vector<LoggedMessage>& log() const { return log_; }
  void WriteJsonLines(std::ostream& out) const;

 private:
  std::vector<LoggedMessage> log_;
};

// Road section management unit. Plans one merging vehicle per call against
// the committed trajectories of every vehicle in the section.
class Rsu {
 public:
  Rsu(PlanningContext ctx, CoordinationParams params, Strategy strategy);

  // Throws kLateAssignment when an assignment cannot reach its vehicle before
  // the planning horizon starts.
  std::vector<TrajectoryAssignment> Process(
      const std::vector<VehicleReport>& reports,
      const std::vector<CommittedVehicle>& committed, MessageBus* bus,
      Plan* plan_out = nullptr) const;

 private:
  PlanningContext ctx_;
  CoordinationParams params_;
  Strategy strategy_;
};

// The on-board unit adheres to its assignment exactly.
Trajectory ObuExecute(const TrajectoryAssignment& assignment);

}  // namespace rampmerge
