#include "rampmerge/coordination.h"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "rampmerge/errors.h"

namespace rampmerge {

std::string_view IntentName(Intent intent) {
  return intent == Intent::kMergeFromRamp ? "merge_from_ramp"
                                          : "continue_mainline";
}

VehicleReport ObuReport(const VehicleState& state, double time,
                        const ClassParams& params) {
  VehicleReport r;
  r.status = {state.id, time, state.station, state.speed,
              state.lane};
  r.intent.vehicle_id = state.id;
  if (state.vehicle_class == VehicleClass::kRamp) {
    r.intent.intent = Intent::kMergeFromRamp;
    r.intent.desired_speed = params.vr0;
  } else {
    r.intent.intent = Intent::kContinueMainline;
    r.intent.desired_speed = params.v0;
  }
  return r;
}

std::string EncodeReport(const VehicleReport& report) {
  nlohmann::json j;
  j["vehicle_id"] = report.status.vehicle_id.value;
  j["timestamp"] = report.status.timestamp;
  j["station"] = report.status.station;
  j["speed"] = report.status.speed;
  j["lane"] = LaneName(report.status.lane);
  j["intent"] = std::string(IntentName(report.intent.intent));
  j["desired_speed"] = report.intent.desired_speed;
  return j.dump();
}

VehicleReport DecodeReport(std::string_view text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    VehicleReport r;
    const VehicleId id{j.at("vehicle_id").get<std::int64_t>()};
    auto lane = ParseLane(j.at("lane").get<std::string>());
    if (!lane) throw MergeError(ErrorCode::kInvalidArgument, "bad lane");
    r.status = {id, j.at("timestamp").get<double>(),
                j.at("station").get<double>(), j.at("speed").get<double>(),
                *lane};
    const std::string intent = j.at("intent").get<std::string>();
    r.intent.vehicle_id = id;
    r.intent.intent = intent == IntentName(Intent::kMergeFromRamp)
                          ? Intent::kMergeFromRamp
                          : Intent::kContinueMainline;
    r.intent.desired_speed = j.at("desired_speed").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw MergeError(ErrorCode::kInvalidArgument,
                     fmt::format("undecodable report: {}", e.what()));
  }
}

std::uint64_t Fnv1a(std::string_view data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string TrajectoryPayload(const Trajectory& traj) {
  std::string out = fmt::format("{}", traj.id().value);
  for (const Segment& s : traj.segments()) {
    out += fmt::format(";{},{},{},{},{}", s.start_time, s.start_station,
                       s.start_speed, s.accel, s.duration);
  }
  for (const LaneInterval& li : traj.lane_schedule()) {
    out += fmt::format("|{},{},{}", li.begin, li.end, LaneName(li.lane));
  }
  return out;
}

void MessageBus::WriteJsonLines(std::ostream& out) const {
  for (const LoggedMessage& m : log_) {
    nlohmann::json j;
    j["type"] = m.type;
    j["vehicle_id"] = m.vehicle_id.value;
    j["sent"] = m.sent_time;
    j["effective"] = m.effective_time;
    j["digest"] = fmt::format("{:016x}", m.digest);
    out << j.dump() << '\n';
  }
}

Rsu::Rsu(PlanningContext ctx, CoordinationParams params, Strategy strategy)
    : ctx_(std::move(ctx)), params_(params), strategy_(strategy) {}

std::vector<TrajectoryAssignment> Rsu::Process(
    const std::vector<VehicleReport>& reports,
    const std::vector<CommittedVehicle>& committed, MessageBus* bus,
    Plan* plan_out) const {
  std::set<VehicleId> known;
  for (const CommittedVehicle& cv : committed) known.insert(cv.trajectory.id());

  const VehicleReport* merging = nullptr;
  std::set<VehicleId> reported;
  for (const VehicleReport& r : reports) {
    reported.insert(r.status.vehicle_id);
    if (bus) {
      const double sent = r.status.timestamp;
      bus->Post({"status", r.status.vehicle_id, sent,
                 sent + params_.transmission_delay, Fnv1a(EncodeReport(r))});
      bus->Post({"intent", r.status.vehicle_id, sent,
                 sent + params_.transmission_delay,
                 Fnv1a(IntentName(r.intent.intent))});
    }
    if (r.intent.intent == Intent::kMergeFromRamp &&
        !known.count(r.status.vehicle_id)) {
      if (merging) {
        throw MergeError(ErrorCode::kInvalidArgument,
                         "more than one new merging vehicle in one round");
      }
      merging = &r;
    }
  }
  if (!merging) {
    throw MergeError(ErrorCode::kInvalidArgument,
                     "no new merging vehicle among the reports");
  }
  const double report_time = merging->status.timestamp;
  for (const CommittedVehicle& cv : committed) {
    const Trajectory& t = cv.trajectory;
    if (t.EntryTime() <= report_time && t.ExitTime() >= report_time &&
        !reported.count(t.id())) {
      throw MergeError(ErrorCode::kInvalidArgument,
                       fmt::format("vehicle {} is in the section but sent no "
                                   "report",
                                   t.id().value));
    }
  }

  MergeScene scene = MakeMergeScene(ctx_, committed,
                                    merging->status.vehicle_id, report_time);
  Plan plan = ResolveMerge(scene, strategy_);

  std::vector<TrajectoryAssignment> out;
  const double issue = report_time + params_.processing_latency;
  for (const auto& [id, traj] : plan.assignments) {
    if (issue + params_.transmission_delay > scene.horizon_start + 1e-12) {
      throw MergeError(
          ErrorCode::kLateAssignment,
          fmt::format("assignment for vehicle {} issued at {:.3f} arrives "
                      "after the horizon start {:.3f}",
                      id.value, issue, scene.horizon_start));
    }
    out.push_back({id, traj, issue, scene.horizon_start});
    if (bus) {
      bus->Post({"assignment", id, issue, issue + params_.transmission_delay,
                 Fnv1a(TrajectoryPayload(traj))});
    }
  }
  if (plan_out) *plan_out = std::move(plan);
  return out;
}

Trajectory ObuExecute(const TrajectoryAssignment& assignment) {
  return assignment.trajectory;
}

}  // namespace rampmerge
