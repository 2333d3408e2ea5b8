#include "rampmerge/engine.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <fmt/format.h>

#include "rampmerge/errors.h"

namespace rampmerge {
namespace {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t StreamSeed(std::uint64_t seed, std::uint64_t stream) {
  return SplitMix64(seed ^ SplitMix64(stream + 1));
}

constexpr std::uint64_t kRampStream = 1000;
constexpr std::uint64_t kBaselineStream = 2000;

constexpr double kHoldStep = 0.5;      // s, ramp entry retry spacing
constexpr int kMaxHolds = 1200;
constexpr double kShiftScanStep = 0.1;  // s
constexpr double kMaxAdmissionShift = 600.0;

VehicleState EntryState(const Arrival& a, const RoadGeometry& geom,
                        const ClassParams& params) {
  if (a.vehicle_class == VehicleClass::kRamp) {
    return {a.id, VehicleClass::kRamp, Lane::Ramp(), geom.ramp_origin(),
            params.vr0, 0.0, a.time};
  }
  return {a.id, VehicleClass::kMainline, a.lane,
          geom.mainline_entry_station, params.v0, 0.0, a.time};
}

bool Measured(const ScenarioConfig& c, double scheduled) {
  return scheduled >= c.warmup && scheduled < c.duration;
}

struct CoopState {
  const ScenarioConfig& config;
  PlanningContext ctx;
  std::vector<CommittedVehicle> committed;
  std::map<VehicleId, std::size_t> index;
  std::map<VehicleId, double> scheduled;
  Timeline* timeline;

  std::vector<CommittedVehicle> ActiveAt(double t) const {
    std::vector<CommittedVehicle> out;
    for (const CommittedVehicle& cv : committed) {
      if (cv.trajectory.ExitTime() >= t) out.push_back(cv);
    }
    return out;
  }

  void Log(double t, std::string type, VehicleId id,
           nlohmann::json detail = nlohmann::json::object()) {
    timeline->events.push_back({t, std::move(type), id, std::move(detail)});
  }

  bool Clear(const Trajectory& t, const std::vector<const Trajectory*>& pool) {
    PairCheckOptions opts;
    opts.extra_margin = ctx.planner.planning_margin;
    for (const Trajectory* o : pool) {
      if (CheckPair(t, *o, ctx.params.vehicle_length, ctx.safety, ctx.urgency,
                    opts)) {
        return false;
      }
    }
    return true;
  }

  // Smallest entry delay that keeps a mainline arrival clear of everything
  // already committed.
  double AdmissionShift(const Trajectory& ff) {
    std::vector<const Trajectory*> pool;
    for (const CommittedVehicle& cv : committed) {
      if (cv.trajectory.ExitTime() >= ff.EntryTime()) {
        pool.push_back(&cv.trajectory);
      }
    }
    if (Clear(ff, pool)) return 0.0;
    double bad = 0.0;
    double good = -1.0;
    for (double d = kShiftScanStep; d <= kMaxAdmissionShift;
         d += kShiftScanStep) {
      if (Clear(ff.Shifted(d), pool)) {
        good = d;
        break;
      }
      bad = d;
    }
    if (good < 0.0) {
      throw MergeError(ErrorCode::kNoFeasibleGap,
                       fmt::format("vehicle {} cannot enter the mainline",
                                   ff.id().value));
    }
    for (int it = 0; it < 40 && good - bad > 1e-9; ++it) {
      const double mid = 0.5 * (bad + good);
      if (Clear(ff.Shifted(mid), pool)) {
        good = mid;
      } else {
        bad = mid;
      }
    }
    return good;
  }

  void Commit(Trajectory traj, VehicleClass cls, double ff_exit) {
    index[traj.id()] = committed.size();
    committed.push_back({std::move(traj), cls, ff_exit});
  }

  void AdmitMainline(const Arrival& a) {
    Trajectory ff = FreeFlowTrajectory(EntryState(a, ctx.geometry, ctx.params),
                                       ctx.geometry, ctx.params);
    const double ff_exit = ff.ExitTime();
    const double shift = AdmissionShift(ff);
    if (shift > 0.0) {
      Log(a.time, "admission_delay", a.id, {{"delay", shift}});
      ff = ff.Shifted(shift);
    }
    Commit(std::move(ff), VehicleClass::kMainline, ff_exit);
  }

  Plan PlanOnce(VehicleId id, double report_time,
                const std::vector<CommittedVehicle>& active) {
    if (!config.use_protocol) {
      return ResolveMerge(MakeMergeScene(ctx, active, id, report_time),
                          config.strategy);
    }
    std::vector<VehicleReport> reports;
    for (const CommittedVehicle& cv : active) {
      const Trajectory& t = cv.trajectory;
      if (t.EntryTime() > report_time) continue;
      VehicleState s{t.id(),
                     cv.vehicle_class,
                     t.LaneAt(report_time),
                     t.StationAt(report_time),
                     t.SpeedAt(report_time),
                     t.AccelAt(report_time),
                     t.EntryTime()};
      reports.push_back(ObuReport(s, report_time, ctx.params));
    }
    const VehicleState self{id,          VehicleClass::kRamp,
                            Lane::Ramp(), ctx.geometry.ramp_origin(),
                            ctx.params.vr0, 0.0,
                            report_time};
    reports.push_back(ObuReport(self, report_time, ctx.params));
    Rsu rsu(ctx, config.coordination, config.strategy);
    Plan plan;
    std::vector<TrajectoryAssignment> assigned =
        rsu.Process(reports, active, &timeline->messages, &plan);
    // Execution replaces the planned trajectories with what the vehicles
    // actually drive.
    for (const TrajectoryAssignment& ta : assigned) {
      plan.assignments.insert_or_assign(ta.vehicle_id, ObuExecute(ta));
    }
    return plan;
  }

  void AdmitRamp(const Arrival& a) {
    const double ff_exit =
        FreeFlowTrajectory(EntryState(a, ctx.geometry, ctx.params),
                           ctx.geometry, ctx.params)
            .ExitTime();
    double report_time = a.time;
    Plan plan;
    for (int hold = 0;; ++hold) {
      report_time = a.time + hold * kHoldStep;
      try {
        plan = PlanOnce(a.id, report_time, ActiveAt(report_time));
        break;
      } catch (const MergeError& e) {
        if (e.code() != ErrorCode::kNoFeasibleGap || hold >= kMaxHolds) throw;
        Log(report_time, "ramp_hold", a.id, {{"reason", e.what()}});
      }
    }

    std::optional<Trajectory> own;
    nlohmann::json adjusted = nlohmann::json::array();
    for (auto& [id, traj] : plan.assignments) {
      if (id == a.id) {
        own = traj;
        continue;
      }
      committed.at(index.at(id)).trajectory = traj;
      adjusted.push_back(id.value);
    }
    if (!own) {
      VehicleState entry = EntryState(a, ctx.geometry, ctx.params);
      entry.entry_time = report_time;
      own = FreeFlowTrajectory(entry, ctx.geometry, ctx.params);
    }
    nlohmann::json detail = {
        {"strategy", std::string(PlanStrategyName(plan.strategy))},
        {"adjusted", adjusted},
        {"cost", plan.total_adjustment_cost}};
    if (!plan.fallback_reason.empty()) {
      detail["fallback"] = plan.fallback_reason;
    }
    if (plan.gap) {
      if (plan.gap->leader_id) detail["gap_leader"] = plan.gap->leader_id->value;
      if (plan.gap->follower_id) {
        detail["gap_follower"] = plan.gap->follower_id->value;
      }
      detail["adequate"] = plan.gap->adequate;
    }
    Log(report_time, "plan", a.id, std::move(detail));
    if (auto m = own->MergeTime()) {
      Log(*m, "merge", a.id, {{"station", own->StationAt(*m)}});
    }
    Commit(std::move(*own), VehicleClass::kRamp, ff_exit);
  }
};

Timeline RunCooperative(const ScenarioConfig& config,
                        const std::vector<Arrival>& arrivals) {
  Timeline tl;
  tl.strategy = config.strategy;
  tl.sample_dt = config.sample_dt;
  CoopState st{config, MakePlanningContext(config), {}, {}, {}, &tl};
  for (const Arrival& a : arrivals) {
    st.scheduled[a.id] = a.time;
    if (a.vehicle_class == VehicleClass::kMainline) {
      st.AdmitMainline(a);
    } else {
      st.AdmitRamp(a);
    }
  }
  for (const CommittedVehicle& cv : st.committed) {
    const Trajectory& t = cv.trajectory;
    VehicleRecord r;
    r.id = t.id();
    r.vehicle_class = cv.vehicle_class;
    r.entry_lane = t.LaneAt(t.EntryTime());
    r.scheduled_entry = st.scheduled.at(t.id());
    r.entry_time = t.EntryTime();
    r.exit_time = t.ExitTime();
    r.free_flow_exit = cv.free_flow_exit;
    r.measured = Measured(config, r.scheduled_entry);
    r.completed = true;
    r.trajectory = t;
    tl.end_time = std::max(tl.end_time, r.exit_time);
    tl.records.push_back(std::move(r));
  }
  return tl;
}

Timeline RunUncoordinated(const ScenarioConfig& config,
                          const std::vector<Arrival>& arrivals) {
  Timeline tl;
  tl.strategy = Strategy::kBaseline;
  tl.sample_dt = config.sample_dt;
  const RoadGeometry geom = BuildGeometry(config.geometry);
  std::vector<BaselineArrival> in;
  in.reserve(arrivals.size());
  for (const Arrival& a : arrivals) {
    in.push_back({a.id, a.vehicle_class, a.lane, a.time});
  }
  const BaselineResult res =
      RunBaseline(in, geom, config.params, config.baseline,
                  StreamSeed(config.seed, kBaselineStream),
                  config.duration + config.drain_limit);
  for (std::size_t i = 0; i < res.vehicles.size(); ++i) {
    const BaselineVehicleResult& v = res.vehicles[i];
    VehicleRecord r;
    r.id = v.id;
    r.vehicle_class = v.vehicle_class;
    r.entry_lane = arrivals[i].lane;
    r.scheduled_entry = v.scheduled_entry;
    r.free_flow_exit =
        FreeFlowTrajectory(EntryState(arrivals[i], geom, config.params), geom,
                           config.params)
            .ExitTime();
    r.measured = Measured(config, r.scheduled_entry);
    r.completed = v.completed;
    if (v.trajectory) {
      r.entry_time = v.trajectory->EntryTime();
      r.exit_time = v.trajectory->ExitTime();
      r.trajectory = v.trajectory;
    } else {
      r.entry_time = r.exit_time = res.end_time;
    }
    if (!r.completed) {
      tl.events.push_back({res.end_time, "still_active", r.id,
                           {{"entered", v.entered}}});
    }
    tl.records.push_back(std::move(r));
  }
  for (const auto& [t, id] : res.merges) {
    tl.events.push_back({t, "merge", id, nlohmann::json::object()});
  }
  for (const BaselineFault& f : res.faults) {
    tl.events.push_back({f.time, "fault", f.follower,
                         {{"leader", f.leader.value}, {"gap", f.gap}}});
  }
  tl.fault_count = static_cast<int>(res.faults.size());
  tl.end_time = res.end_time;
  return tl;
}

}  // namespace

void ValidateScenario(const ScenarioConfig& c) {
  auto bad = [](std::string msg) {
    throw MergeError(ErrorCode::kInvalidArgument, std::move(msg));
  };
  if (!(c.mainline_volume >= 0.0) || !(c.ramp_volume >= 0.0)) {
    bad("volumes must be non-negative");
  }
  if (!(c.warmup >= 0.0) || !(c.duration > c.warmup)) {
    bad(fmt::format("need duration > warmup >= 0, got {} and {}", c.duration,
                    c.warmup));
  }
  if (!(c.sample_dt > 0.0)) bad("sample_dt must be positive");
  if (!(c.drain_limit >= 0.0)) bad("drain limit must be non-negative");
  ValidateClassParams(c.params);
  ValidateSafetyParams(c.safety);
  ValidateKraussParams(c.baseline.krauss);
  BuildGeometry(c.geometry);
  for (const ScriptedArrival& s : c.script) {
    if (!(s.time >= 0.0)) bad("scripted arrival before time 0");
    if (s.vehicle_class == VehicleClass::kMainline &&
        (s.lane < 0 || s.lane >= c.geometry.mainline_lane_count)) {
      bad(fmt::format("scripted arrival on missing lane {}", s.lane));
    }
  }
}

PlanningContext MakePlanningContext(const ScenarioConfig& c) {
  return {BuildGeometry(c.geometry), c.params, c.safety, c.urgency,
          c.planner};
}

double MinimumEntryHeadway(double speed, const ClassParams& params,
                           const SafetyParams& safety) {
  return (CooperativeSafetyDistance(speed, speed, safety) +
          params.vehicle_length) /
         speed;
}

std::vector<double> PoissonSchedule(double volume, double min_headway,
                                    double horizon, std::uint64_t seed) {
  std::vector<double> out;
  if (volume <= 0.0) return out;
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> headway(volume / 3600.0);
  double raw = 0.0;
  for (;;) {
    raw += headway(rng);
    double t = raw;
    if (!out.empty()) t = std::max(t, out.back() + min_headway);
    if (t >= horizon) break;
    out.push_back(t);
  }
  return out;
}

std::vector<Arrival> GenerateArrivals(const ScenarioConfig& config,
                                      std::uint64_t seed) {
  ValidateScenario(config);
  std::vector<Arrival> out;
  if (!config.script.empty()) {
    for (const ScriptedArrival& s : config.script) {
      Arrival a;
      a.vehicle_class = s.vehicle_class;
      a.lane = s.vehicle_class == VehicleClass::kRamp ? Lane::Ramp()
                                                      : Lane::Mainline(s.lane);
      a.time = s.time;
      out.push_back(a);
    }
  } else {
    const ClassParams& p = config.params;
    for (int lane = 0; lane < config.geometry.mainline_lane_count; ++lane) {
      for (double t : PoissonSchedule(
               config.mainline_volume,
               MinimumEntryHeadway(p.v0, p, config.safety), config.duration,
               StreamSeed(seed, static_cast<std::uint64_t>(lane)))) {
        out.push_back({{}, VehicleClass::kMainline, Lane::Mainline(lane), t});
      }
    }
    for (double t :
         PoissonSchedule(config.ramp_volume,
                         MinimumEntryHeadway(p.vr0, p, config.safety),
                         config.duration, StreamSeed(seed, kRampStream))) {
      out.push_back({{}, VehicleClass::kRamp, Lane::Ramp(), t});
    }
  }
  // Mainline first at equal times so a ramp vehicle sees it when planning.
  std::stable_sort(out.begin(), out.end(),
                   [](const Arrival& a, const Arrival& b) {
                     if (a.time != b.time) return a.time < b.time;
                     return a.vehicle_class == VehicleClass::kMainline &&
                            b.vehicle_class == VehicleClass::kRamp;
                   });
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].id = VehicleId{static_cast<std::int64_t>(i + 1)};
  }
  return out;
}

Timeline Run(const ScenarioConfig& config) {
  const std::vector<Arrival> arrivals = GenerateArrivals(config, config.seed);
  Timeline tl = config.strategy == Strategy::kBaseline
                    ? RunUncoordinated(config, arrivals)
                    : RunCooperative(config, arrivals);
  std::stable_sort(tl.events.begin(), tl.events.end(),
                   [](const TimelineEvent& a, const TimelineEvent& b) {
                     if (a.time != b.time) return a.time < b.time;
                     return a.vehicle_id < b.vehicle_id;
                   });
  return tl;
}

Timeline RunFreeFlow(const ScenarioConfig& config) {
  const std::vector<Arrival> arrivals = GenerateArrivals(config, config.seed);
  const RoadGeometry geom = BuildGeometry(config.geometry);
  Timeline tl;
  tl.strategy = config.strategy;
  tl.sample_dt = config.sample_dt;
  for (const Arrival& a : arrivals) {
    Trajectory t =
        FreeFlowTrajectory(EntryState(a, geom, config.params), geom,
                           config.params);
    VehicleRecord r;
    r.id = a.id;
    r.vehicle_class = a.vehicle_class;
    r.entry_lane = a.lane;
    r.scheduled_entry = r.entry_time = a.time;
    r.exit_time = r.free_flow_exit = t.ExitTime();
    r.measured = Measured(config, a.time);
    r.completed = true;
    r.trajectory = std::move(t);
    tl.end_time = std::max(tl.end_time, r.exit_time);
    tl.records.push_back(std::move(r));
  }
  return tl;
}

void Timeline::ForEachSample(
    const std::function<void(const StateSample&)>& fn) const {
  std::vector<std::size_t> by_entry;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].trajectory) by_entry.push_back(i);
  }
  std::stable_sort(by_entry.begin(), by_entry.end(),
                   [&](std::size_t a, std::size_t b) {
                     return records[a].trajectory->EntryTime() <
                            records[b].trajectory->EntryTime();
                   });
  std::vector<std::size_t> active;  // record indices, id order
  std::size_t next = 0;
  const long last = static_cast<long>(std::floor(end_time / sample_dt + 1e-9));
  for (long k = 0; k <= last; ++k) {
    const double t = static_cast<double>(k) * sample_dt;
    while (next < by_entry.size() &&
           records[by_entry[next]].trajectory->EntryTime() <= t) {
      const std::size_t idx = by_entry[next++];
      active.insert(std::upper_bound(active.begin(), active.end(), idx,
                                     [&](std::size_t a, std::size_t b) {
                                       return records[a].id < records[b].id;
                                     }),
                    idx);
    }
    std::erase_if(active, [&](std::size_t i) {
      return records[i].trajectory->ExitTime() < t;
    });
    for (std::size_t i : active) {
      const Trajectory& tr = *records[i].trajectory;
      fn({t, records[i].id, records[i].vehicle_class, tr.LaneAt(t),
          tr.StationAt(t), tr.SpeedAt(t)});
    }
  }
}

std::vector<StateSample> Timeline::Samples() const {
  std::vector<StateSample> out;
  ForEachSample([&](const StateSample& s) { out.push_back(s); });
  return out;
}

SafetyAudit AuditSamples(const Timeline& timeline, const SafetyParams& p,
                         double vehicle_length) {
  SafetyAudit audit;
  std::vector<StateSample> instant;
  auto flush = [&] {
    auto stream = [](const Lane& l) {
      return l.kind == LaneKind::kMainline ? l.index : -1;
    };
    std::stable_sort(instant.begin(), instant.end(),
                     [&](const StateSample& a, const StateSample& b) {
                       if (stream(a.lane) != stream(b.lane)) {
                         return stream(a.lane) < stream(b.lane);
                       }
                       return a.station > b.station;
                     });
    for (std::size_t i = 1; i < instant.size(); ++i) {
      const StateSample& lead = instant[i - 1];
      const StateSample& follow = instant[i];
      if (stream(lead.lane) != stream(follow.lane)) continue;
      const double gap = lead.station - follow.station - vehicle_length;
      const double need = CooperativeSafetyDistance(follow.speed, lead.speed, p);
      ++audit.pairs_checked;
      audit.min_separation = std::min(audit.min_separation, gap);
      if (gap < need - p.sampling_tolerance) {
        ++audit.violations;
        audit.worst_shortfall = std::max(audit.worst_shortfall, need - gap);
      }
    }
    instant.clear();
  };
  timeline.ForEachSample([&](const StateSample& s) {
    if (!instant.empty() && instant.front().time != s.time) flush();
    instant.push_back(s);
  });
  flush();
  return audit;
}

}  // namespace rampmerge
