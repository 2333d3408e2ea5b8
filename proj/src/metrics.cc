#include "rampmerge/metrics.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "rampmerge/errors.h"

namespace rampmerge {
namespace {

struct StreamSum {
  double total = 0.0;
  int count = 0;
};

StreamSum SumDelays(const Timeline& timeline, VehicleClass stream) {
  StreamSum s;
  for (const VehicleRecord& r : timeline.records) {
    if (r.vehicle_class != stream || !r.measured || !r.completed) continue;
    s.total += r.exit_time - r.free_flow_exit;
    ++s.count;
  }
  return s;
}

DelayStat Aggregate(const std::vector<std::optional<double>>& values) {
  DelayStat st;
  double sum = 0.0;
  int n = 0;
  for (const auto& v : values) {
    if (!v) continue;
    sum += *v;
    ++n;
    st.min = st.min ? std::min(*st.min, *v) : *v;
    st.max = st.max ? std::max(*st.max, *v) : *v;
  }
  if (n > 0) st.mean = sum / n;
  return st;
}

bool Le(const std::optional<double>& a, const std::optional<double>& b) {
  return a && b && *a <= *b;
}

bool Lt(const std::optional<double>& a, const std::optional<double>& b) {
  return a && b && *a < *b;
}

}  // namespace

double AverageDelay(const Timeline& timeline, VehicleClass stream) {
  const StreamSum s = SumDelays(timeline, stream);
  if (s.count == 0) {
    throw MergeError(ErrorCode::kEmptyStream,
                     fmt::format("no measured {} vehicle completed its trip",
                                 VehicleClassName(stream)));
  }
  return s.total / s.count;
}

std::string CellLabel(double mainline_volume, double ramp_volume,
                      Strategy strategy) {
  return fmt::format("{}/{}/{}", mainline_volume, ramp_volume,
                     StrategyName(strategy));
}

DelayReport MakeDelayReport(const ScenarioConfig& config,
                            const Timeline& timeline) {
  DelayReport r;
  r.label = CellLabel(config.mainline_volume, config.ramp_volume,
                      config.strategy);
  r.strategy = config.strategy;
  r.mainline_volume = config.mainline_volume;
  r.ramp_volume = config.ramp_volume;
  r.seed = config.seed;
  const StreamSum ml = SumDelays(timeline, VehicleClass::kMainline);
  const StreamSum rp = SumDelays(timeline, VehicleClass::kRamp);
  if (ml.count > 0) r.mainline_delay = ml.total / ml.count;
  if (rp.count > 0) r.ramp_delay = rp.total / rp.count;
  r.mainline_count = ml.count;
  r.ramp_count = rp.count;
  r.vehicles = static_cast<int>(timeline.records.size());
  for (const VehicleRecord& v : timeline.records) {
    if (v.completed) {
      ++r.completed;
    } else {
      ++r.still_active;
    }
  }
  const SafetyAudit audit = AuditSamples(timeline, config.safety,
                                         config.params.vehicle_length);
  r.min_separation = audit.min_separation;
  r.safety_violations = audit.violations;
  r.faults = timeline.fault_count;
  return r;
}

DelayReport RunScenario(const ScenarioConfig& config) {
  return MakeDelayReport(config, Run(config));
}

const MatrixCell& MatrixSummary::Cell(double mainline_volume,
                                      double ramp_volume,
                                      Strategy strategy) const {
  for (const MatrixCell& c : cells) {
    if (c.mainline_volume == mainline_volume &&
        c.ramp_volume == ramp_volume && c.strategy == strategy) {
      return c;
    }
  }
  throw MergeError(ErrorCode::kIncompleteMatrix,
                   fmt::format("no cell {}", CellLabel(mainline_volume,
                                                       ramp_volume, strategy)));
}

MatrixSummary SummarizeMatrix(const std::vector<DelayReport>& reports,
                              const MatrixSpec& spec) {
  MatrixSummary out;
  for (double ml : spec.mainline_volumes) {
    for (double rv : spec.ramp_volumes) {
      for (Strategy s : spec.strategies) {
        MatrixCell cell;
        cell.mainline_volume = ml;
        cell.ramp_volume = rv;
        cell.strategy = s;
        cell.min_separation = std::numeric_limits<double>::infinity();
        std::vector<std::optional<double>> mld, rpd;
        for (std::uint64_t seed : spec.seeds) {
          auto it = std::find_if(
              reports.begin(), reports.end(), [&](const DelayReport& r) {
                return r.mainline_volume == ml && r.ramp_volume == rv &&
                       r.strategy == s && r.seed == seed;
              });
          if (it == reports.end()) {
            throw MergeError(ErrorCode::kIncompleteMatrix,
                             fmt::format("missing cell {} seed {}",
                                         CellLabel(ml, rv, s), seed));
          }
          mld.push_back(it->mainline_delay);
          rpd.push_back(it->ramp_delay);
          cell.min_separation = std::min(cell.min_separation,
                                         it->min_separation);
          cell.safety_violations += it->safety_violations;
          cell.faults += it->faults;
          cell.seeds.push_back(seed);
        }
        cell.mainline = Aggregate(mld);
        cell.ramp = Aggregate(rpd);
        out.cells.push_back(std::move(cell));
      }
    }
  }

  const bool all_three =
      std::count(spec.strategies.begin(), spec.strategies.end(),
                 Strategy::kMainlinePriority) &&
      std::count(spec.strategies.begin(), spec.strategies.end(),
                 Strategy::kRampPriority) &&
      std::count(spec.strategies.begin(), spec.strategies.end(),
                 Strategy::kBaseline);
  if (!all_three) return out;
  for (double ml : spec.mainline_volumes) {
    for (double rv : spec.ramp_volumes) {
      const MatrixCell& mp = out.Cell(ml, rv, Strategy::kMainlinePriority);
      const MatrixCell& rp = out.Cell(ml, rv, Strategy::kRampPriority);
      const MatrixCell& bl = out.Cell(ml, rv, Strategy::kBaseline);
      VolumeOrdering o;
      o.mainline_volume = ml;
      o.ramp_volume = rv;
      o.mainline_strict = Lt(mp.mainline.mean, rp.mainline.mean) &&
                          Lt(rp.mainline.mean, bl.mainline.mean);
      o.mainline_weak = Le(mp.mainline.mean, rp.mainline.mean) &&
                        Le(rp.mainline.mean, bl.mainline.mean);
      o.mainline_mp_lowest = Le(mp.mainline.mean, rp.mainline.mean) &&
                             Le(mp.mainline.mean, bl.mainline.mean);
      o.ramp_baseline_highest = Lt(mp.ramp.mean, bl.ramp.mean) &&
                                Lt(rp.ramp.mean, bl.ramp.mean);
      o.ramp_mp_not_above_rp = Le(mp.ramp.mean, rp.ramp.mean);
      out.ordering.push_back(o);
    }
  }
  return out;
}

std::vector<std::string> BaselineRampTrendViolations(
    const MatrixSummary& summary, const MatrixSpec& spec) {
  std::vector<std::string> out;
  if (!std::count(spec.strategies.begin(), spec.strategies.end(),
                  Strategy::kBaseline)) {
    return out;
  }
  std::vector<double> ramps = spec.ramp_volumes;
  std::sort(ramps.begin(), ramps.end());
  for (double ml : spec.mainline_volumes) {
    for (std::size_t i = 1; i < ramps.size(); ++i) {
      const auto& lo = summary.Cell(ml, ramps[i - 1], Strategy::kBaseline);
      const auto& hi = summary.Cell(ml, ramps[i], Strategy::kBaseline);
      if (lo.ramp.mean && hi.ramp.mean && *hi.ramp.mean < *lo.ramp.mean) {
        out.push_back(fmt::format(
            "mainline {}: baseline ramp delay falls from {:.3f} s at ramp {} "
            "to {:.3f} s at ramp {}",
            ml, *lo.ramp.mean, ramps[i - 1], *hi.ramp.mean, ramps[i]));
      }
    }
  }
  return out;
}

std::vector<DelayReport> RunMatrix(
    const ScenarioConfig& base, const MatrixSpec& spec, int jobs,
    const std::function<std::optional<DelayReport>(const ScenarioConfig&)>&
        lookup,
    const std::function<void(const DelayReport&)>& on_done) {
  std::vector<ScenarioConfig> runs;
  for (double ml : spec.mainline_volumes) {
    for (double rv : spec.ramp_volumes) {
      for (Strategy s : spec.strategies) {
        for (std::uint64_t seed : spec.seeds) {
          ScenarioConfig c = base;
          c.script.clear();
          c.mainline_volume = ml;
          c.ramp_volume = rv;
          c.strategy = s;
          c.seed = seed;
          runs.push_back(std::move(c));
        }
      }
    }
  }
  std::vector<DelayReport> results(runs.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (failure) return;
      }
      try {
        std::optional<DelayReport> cached;
        if (lookup) cached = lookup(runs[i]);
        if (cached) {
          results[i] = std::move(*cached);
          continue;
        }
        results[i] = RunScenario(runs[i]);
        if (on_done) {
          std::lock_guard<std::mutex> lock(mu);
          on_done(results[i]);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(runs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < n; ++k) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace rampmerge
