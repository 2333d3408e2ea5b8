#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rampmerge/engine.h"

namespace rampmerge {

// Mean over measured, completed vehicles of the class of (exit time - free
// flow exit time). Throws kEmptyStream when no such vehicle exists.
double AverageDelay(const Timeline& timeline, VehicleClass stream);

struct DelayReport {
  std::string label;
  Strategy strategy = Strategy::kMainlinePriority;
  double mainline_volume = 0.0;
  double ramp_volume = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> mainline_delay;  // s/veh; absent for an empty stream
  std::optional<double> ramp_delay;
  int mainline_count = 0;  // measured vehicles behind each average
  int ramp_count = 0;
  int vehicles = 0;
  int completed = 0;
  int still_active = 0;
  double min_separation = 0.0;  // m, over sampled same-stream pairs
  long safety_violations = 0;
  int faults = 0;
};

std::string CellLabel(double mainline_volume, double ramp_volume,
                      Strategy strategy);

DelayReport MakeDelayReport(const ScenarioConfig& config,
                            const Timeline& timeline);

// Run plus report in one step; what a matrix cell does.
DelayReport RunScenario(const ScenarioConfig& config);

struct MatrixSpec {
  std::vector<double> mainline_volumes{800.0, 1200.0, 1800.0};
  std::vector<double> ramp_volumes{200.0, 300.0, 500.0};
  std::vector<Strategy> strategies{Strategy::kMainlinePriority,
                                   Strategy::kRampPriority,
                                   Strategy::kBaseline};
  std::vector<std::uint64_t> seeds{1, 2, 3};

  std::size_t RunCount() const {
    return mainline_volumes.size() * ramp_volumes.size() * strategies.size() *
           seeds.size();
  }
};

struct DelayStat {
  std::optional<double> mean;  // over seeds with a non-empty stream
  std::optional<double> min;
  std::optional<double> max;
};

struct MatrixCell {
  double mainline_volume = 0.0;
  double ramp_volume = 0.0;
  Strategy strategy = Strategy::kMainlinePriority;
  DelayStat mainline;
  DelayStat ramp;
  double min_separation = 0.0;
  long safety_violations = 0;
  int faults = 0;
  std::vector<std::uint64_t> seeds;
};

// Orderings across strategies for one volume pair. A missing mean makes every
// comparison that needs it false.
struct VolumeOrdering {
  double mainline_volume = 0.0;
  double ramp_volume = 0.0;
  bool mainline_strict = false;      // MP < RP < baseline
  bool mainline_weak = false;        // MP <= RP <= baseline
  bool mainline_mp_lowest = false;   // MP <= RP and MP <= baseline
  bool ramp_baseline_highest = false;
  bool ramp_mp_not_above_rp = false;
};

struct MatrixSummary {
  std::vector<MatrixCell> cells;  // mainline, ramp, strategy order
  std::vector<VolumeOrdering> ordering;

  const MatrixCell& Cell(double mainline_volume, double ramp_volume,
                         Strategy strategy) const;
};

// Throws kIncompleteMatrix naming the first missing (cell, seed).
MatrixSummary SummarizeMatrix(const std::vector<DelayReport>& reports,
                              const MatrixSpec& spec);

// Baseline ramp delay should not fall as ramp volume grows; returns one line
// per violation of that trend. Informational only.
std::vector<std::string> BaselineRampTrendViolations(
    const MatrixSummary& summary, const MatrixSpec& spec);

// Runs every (cell, seed) with up to `jobs` threads. `lookup` may supply a
// finished report (resume); `on_done` sees each fresh report as it lands.
// The result order is fixed by the matrix definition, never by completion order.
std::vector<DelayReport> RunMatrix(
    const ScenarioConfig& base, const MatrixSpec& spec, int jobs,
    const std::function<std::optional<DelayReport>(const ScenarioConfig&)>&
        lookup = {},
    const std::function<void(const DelayReport&)>& on_done = {});

}  // namespace rampmerge
