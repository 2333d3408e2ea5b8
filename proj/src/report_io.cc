#include "rampmerge/report_io.h"

#include <fmt/format.h>

#include "rampmerge/errors.h"

namespace rampmerge {
namespace {

std::string Opt(const std::optional<double>& v) {
  return v ? fmt::format("{}", *v) : std::string();
}

std::string OptText(const std::optional<double>& v) {
  return v ? fmt::format("{:.3f}", *v) : std::string("absent");
}

std::string Mark(bool ok) { return ok ? "yes" : "NO"; }

std::string Header(const RunConfig& c) {
  const ScenarioConfig& s = c.scenario;
  std::string out;
  out += fmt::format("duration {} s, warmup {} s (vehicles scheduled in "
                     "[{}, {}) s are measured), sample step {} s\n",
                     s.duration, s.warmup, s.warmup, s.duration, s.sample_dt);
  out += fmt::format("replications per cell: {}\n", c.matrix.seeds.size());
  out += "delay: exit time minus the free-flow exit time for the scheduled "
         "arrival, so time spent waiting to enter or queueing on the ramp "
         "counts\n";
  return out;
}

}  // namespace

void WriteTimelineCsv(std::ostream& out, const Timeline& timeline) {
  out << "time,vehicle_id,class,lane,station,speed\n";
  timeline.ForEachSample([&](const StateSample& s) {
    out << fmt::format("{},{},{},{},{},{}\n", s.time, s.vehicle_id.value,
                       VehicleClassName(s.vehicle_class), LaneName(s.lane),
                       s.station, s.speed);
  });
}

void WriteEventsJsonl(std::ostream& out, const Timeline& timeline) {
  for (const TimelineEvent& e : timeline.events) {
    nlohmann::ordered_json j;
    j["time"] = e.time;
    j["type"] = e.type;
    j["vehicle_id"] = e.vehicle_id.value;
    for (const auto& [k, v] : e.detail.items()) j[k] = v;
    out << j.dump() << '\n';
  }
}

void WriteVehiclesCsv(std::ostream& out, const Timeline& timeline) {
  out << "vehicle_id,class,entry_lane,scheduled_entry,entry_time,exit_time,"
         "free_flow_exit,delay,measured,completed\n";
  for (const VehicleRecord& r : timeline.records) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.id.value,
                       VehicleClassName(r.vehicle_class),
                       LaneName(r.entry_lane), r.scheduled_entry, r.entry_time,
                       r.exit_time, r.free_flow_exit,
                       r.completed ? fmt::format("{}", r.exit_time -
                                                           r.free_flow_exit)
                                   : std::string(),
                       r.measured ? 1 : 0, r.completed ? 1 : 0);
  }
}

void WriteTrajectoriesCsv(std::ostream& out, const Timeline& timeline) {
  out << "strategy,vehicle_id,class,segment,start_time,start_station,"
         "start_speed,accel,duration,lane\n";
  const std::string_view tag = StrategyName(timeline.strategy);
  for (const VehicleRecord& r : timeline.records) {
    if (!r.trajectory) continue;
    const auto& segs = r.trajectory->segments();
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const Segment& s = segs[i];
      out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", tag, r.id.value,
                         VehicleClassName(r.vehicle_class), i, s.start_time,
                         s.start_station, s.start_speed, s.accel, s.duration,
                         LaneName(r.trajectory->LaneAt(s.start_time)));
    }
  }
}

void WriteConflictsCsv(std::ostream& out,
                       const std::vector<PairViolation>& conflicts) {
  out << "first_id,second_id,first_violation_time,worst_time,separation_m,"
         "required_m,margin_m,urgency\n";
  for (const PairViolation& v : conflicts) {
    out << fmt::format("{},{},{},{},{},{},{},{}\n", v.first.value,
                       v.second.value, v.first_violation_time, v.worst_time,
                       v.separation, v.required, v.min_margin, v.urgency);
  }
}

nlohmann::json DelayReportToJson(const DelayReport& r) {
  nlohmann::ordered_json j;
  j["label"] = r.label;
  j["strategy"] = std::string(StrategyName(r.strategy));
  j["mainline_volume"] = r.mainline_volume;
  j["ramp_volume"] = r.ramp_volume;
  j["seed"] = r.seed;
  j["mainline_delay"] = r.mainline_delay ? nlohmann::json(*r.mainline_delay)
                                         : nlohmann::json(nullptr);
  j["ramp_delay"] =
      r.ramp_delay ? nlohmann::json(*r.ramp_delay) : nlohmann::json(nullptr);
  j["mainline_count"] = r.mainline_count;
  j["ramp_count"] = r.ramp_count;
  j["vehicles"] = r.vehicles;
  j["completed"] = r.completed;
  j["still_active"] = r.still_active;
  j["min_separation"] = r.min_separation;
  j["safety_violations"] = r.safety_violations;
  j["faults"] = r.faults;
  return nlohmann::json::parse(j.dump());
}

DelayReport DelayReportFromJson(const nlohmann::json& j) {
  try {
    DelayReport r;
    r.label = j.at("label").get<std::string>();
    auto s = ParseStrategy(j.at("strategy").get<std::string>());
    if (!s) throw MergeError(ErrorCode::kInvalidArgument, "bad strategy");
    r.strategy = *s;
    r.mainline_volume = j.at("mainline_volume").get<double>();
    r.ramp_volume = j.at("ramp_volume").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("mainline_delay").is_null()) {
      r.mainline_delay = j.at("mainline_delay").get<double>();
    }
    if (!j.at("ramp_delay").is_null()) {
      r.ramp_delay = j.at("ramp_delay").get<double>();
    }
    r.mainline_count = j.at("mainline_count").get<int>();
    r.ramp_count = j.at("ramp_count").get<int>();
    r.vehicles = j.at("vehicles").get<int>();
    r.completed = j.at("completed").get<int>();
    r.still_active = j.at("still_active").get<int>();
    r.min_separation = j.at("min_separation").get<double>();
    r.safety_violations = j.at("safety_violations").get<long>();
    r.faults = j.at("faults").get<int>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw MergeError(ErrorCode::kInvalidArgument,
                     fmt::format("unreadable delay report: {}", e.what()));
  }
}

std::string DelayReportText(const DelayReport& r) {
  std::string out;
  out += fmt::format("scenario {} seed {}\n", r.label, r.seed);
  out += fmt::format("  mainline average delay: {} s/veh over {} vehicles\n",
                     OptText(r.mainline_delay), r.mainline_count);
  out += fmt::format("  ramp average delay:     {} s/veh over {} vehicles\n",
                     OptText(r.ramp_delay), r.ramp_count);
  out += fmt::format("  vehicles: {} total, {} completed, {} still active\n",
                     r.vehicles, r.completed, r.still_active);
  out += fmt::format("  min sampled gap: {:.3f} m, safety-distance "
                     "shortfalls: {}, faults: {}\n",
                     r.min_separation, r.safety_violations, r.faults);
  return out;
}

void WriteMatrixCsv(std::ostream& out,
                    const std::vector<DelayReport>& reports) {
  out << "mainline_volume,ramp_volume,strategy,seed,mainline_delay_s,"
         "ramp_delay_s,min_separation_m,faults\n";
  for (const DelayReport& r : reports) {
    out << fmt::format("{},{},{},{},{},{},{},{}\n", r.mainline_volume,
                       r.ramp_volume, StrategyName(r.strategy), r.seed,
                       Opt(r.mainline_delay), Opt(r.ramp_delay),
                       r.min_separation, r.faults);
  }
}

void WriteBarChartCsv(std::ostream& out, const MatrixSummary& summary,
                      const MatrixSpec& spec, VehicleClass stream) {
  out << "mainline_volume,ramp_volume";
  for (Strategy s : spec.strategies) out << ',' << StrategyName(s);
  out << '\n';
  for (double ml : spec.mainline_volumes) {
    for (double rv : spec.ramp_volumes) {
      out << fmt::format("{},{}", ml, rv);
      for (Strategy s : spec.strategies) {
        const MatrixCell& c = summary.Cell(ml, rv, s);
        out << ','
            << Opt(stream == VehicleClass::kMainline ? c.mainline.mean
                                                     : c.ramp.mean);
      }
      out << '\n';
    }
  }
}

void WriteCellSummaryCsv(std::ostream& out, const MatrixSummary& summary) {
  out << "mainline_volume,ramp_volume,strategy,mainline_mean_s,"
         "mainline_min_s,mainline_max_s,ramp_mean_s,ramp_min_s,ramp_max_s,"
         "min_separation_m,safety_violations,faults\n";
  for (const MatrixCell& c : summary.cells) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n",
                       c.mainline_volume, c.ramp_volume,
                       StrategyName(c.strategy), Opt(c.mainline.mean),
                       Opt(c.mainline.min), Opt(c.mainline.max),
                       Opt(c.ramp.mean), Opt(c.ramp.min), Opt(c.ramp.max),
                       c.min_separation, c.safety_violations, c.faults);
  }
}

std::string OrderingSummaryText(const MatrixSummary& summary) {
  std::string out =
      "cell (mainline/ramp veh/h)  mainline priority lowest mainline delay  "
      "MP<=RP<=baseline  MP<RP<baseline  baseline ramp delay highest  "
      "MP ramp<=RP ramp\n";
  int lowest = 0, weak = 0, strict = 0, ramp_high = 0, ramp_mp = 0;
  for (const VolumeOrdering& o : summary.ordering) {
    out += fmt::format("{:>5}/{:<5}               {:<40} {:<17} {:<15} "
                       "{:<27} {}\n",
                       o.mainline_volume, o.ramp_volume,
                       Mark(o.mainline_mp_lowest), Mark(o.mainline_weak),
                       Mark(o.mainline_strict), Mark(o.ramp_baseline_highest),
                       Mark(o.ramp_mp_not_above_rp));
    lowest += o.mainline_mp_lowest;
    weak += o.mainline_weak;
    strict += o.mainline_strict;
    ramp_high += o.ramp_baseline_highest;
    ramp_mp += o.ramp_mp_not_above_rp;
  }
  const std::size_t n = summary.ordering.size();
  out += fmt::format("held in: {}/{}, {}/{}, {}/{}, {}/{}, {}/{}\n", lowest, n,
                     weak, n, strict, n, ramp_high, n, ramp_mp, n);
  return out;
}

std::string RunReportText(const RunConfig& config, const DelayReport& report) {
  std::string out = "# run report\n";
  out += Header(config);
  out += '\n';
  out += DelayReportText(report);
  out += "\n# resolved config\n";
  out += ResolvedConfigText(config);
  return out;
}

std::string MatrixReportText(const RunConfig& config,
                             const MatrixSummary& summary,
                             const std::vector<std::string>& trend_notes) {
  std::string out = "# matrix report\n";
  out += Header(config);
  out += '\n';
  out += fmt::format("{:>8} {:>6} {:<18} {:>10} {:>10} {:>10} {:>10} "
                     "{:>10} {:>10}\n",
                     "mainline", "ramp", "strategy", "ml mean", "ml min",
                     "ml max", "ramp mean", "ramp min", "ramp max");
  for (const MatrixCell& c : summary.cells) {
    out += fmt::format("{:>8} {:>6} {:<18} {:>10} {:>10} {:>10} {:>10} "
                       "{:>10} {:>10}\n",
                       c.mainline_volume, c.ramp_volume,
                       StrategyName(c.strategy), OptText(c.mainline.mean),
                       OptText(c.mainline.min), OptText(c.mainline.max),
                       OptText(c.ramp.mean), OptText(c.ramp.min),
                       OptText(c.ramp.max));
  }
  out += "\n# orderings\n";
  out += OrderingSummaryText(summary);
  out += "\n# baseline ramp delay against ramp volume\n";
  if (trend_notes.empty()) {
    out += "non-decreasing for every mainline volume\n";
  } else {
    for (const std::string& n : trend_notes) out += n + '\n';
  }
  out += "\n# resolved config\n";
  out += ResolvedConfigText(config);
  return out;
}

}  // namespace rampmerge
