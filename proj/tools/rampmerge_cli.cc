// Command-line front end: single runs, the volume matrix and diagrams.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rampmerge/config.h"
#include "rampmerge/diagram.h"
#include "rampmerge/engine.h"
#include "rampmerge/errors.h"
#include "rampmerge/metrics.h"
#include "rampmerge/report_io.h"

namespace fs = std::filesystem;
using namespace rampmerge;

namespace {

// Thrown to abort with a stage-tagged diagnostic.
struct StageError {
  std::string stage;
  std::string message;
};

template <typename Fn>
auto Stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const MergeError& e) {
    throw StageError{stage, fmt::format("{}: {}", ErrorCodeName(e.code()),
                                        e.what())};
  } catch (const std::exception& e) {
    throw StageError{stage, e.what()};
  }
}

class OutputDir {
 public:
  OutputDir(fs::path dir, bool overwrite)
      : dir_(std::move(dir)), overwrite_(overwrite) {
    fs::create_directories(dir_);
  }

  fs::path Path(const std::string& name) const { return dir_ / name; }

  // Refuses to replace an existing file unless overwriting was requested.
  void Write(const std::string& name, const std::string& content,
             bool replace_ok = false) const {
    WriteFile(Path(name), content, overwrite_ || replace_ok);
  }

  static void WriteFile(const fs::path& p, const std::string& content,
                        bool overwrite) {
    if (!overwrite && fs::exists(p)) {
      throw std::runtime_error(fmt::format(
          "{} already exists; pass --overwrite to replace it", p.string()));
    }
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error(fmt::format("cannot write {}", p.string()));
    }
    out << content;
  }

 private:
  fs::path dir_;
  bool overwrite_;
};

template <typename Fn>
std::string Capture(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string strategy;
  std::string out_dir = "out";
  bool overwrite = false;
  bool free_flow = false;
  bool conflicts = false;
};

RunConfig LoadWithOverrides(const std::string& path,
                            const std::optional<std::uint64_t>& seed,
                            const std::string& strategy) {
  RunConfig cfg = Stage("config", [&] { return LoadConfigFile(path); });
  if (seed) cfg.scenario.seed = *seed;
  if (!strategy.empty()) {
    auto s = ParseStrategy(strategy);
    if (!s) {
      throw StageError{"config",
                       fmt::format("unknown strategy '{}'", strategy)};
    }
    cfg.scenario.strategy = *s;
  }
  return cfg;
}

DiagramOptions DiagramFor(const RunConfig& cfg, const std::string& title) {
  DiagramOptions opt;
  opt.merge_point = cfg.scenario.geometry.accel_lane_start +
                    cfg.scenario.geometry.accel_lane_length;
  opt.title = title;
  return opt;
}

int CmdRun(const RunArgs& a) {
  const RunConfig cfg = LoadWithOverrides(a.config, a.seed, a.strategy);
  const Timeline tl = Stage("simulation", [&] { return Run(cfg.scenario); });
  const DelayReport report =
      Stage("metrics", [&] { return MakeDelayReport(cfg.scenario, tl); });
  Stage("output", [&] {
    OutputDir out(a.out_dir, a.overwrite);
    out.Write("timeline.csv", Capture([&](auto& os) { WriteTimelineCsv(os, tl); }));
    out.Write("events.jsonl", Capture([&](auto& os) { WriteEventsJsonl(os, tl); }));
    out.Write("messages.jsonl",
              Capture([&](auto& os) { tl.messages.WriteJsonLines(os); }));
    out.Write("vehicles.csv", Capture([&](auto& os) { WriteVehiclesCsv(os, tl); }));
    out.Write("trajectories.csv",
              Capture([&](auto& os) { WriteTrajectoriesCsv(os, tl); }));
    out.Write("report.txt", RunReportText(cfg, report));
    out.Write("diagram.svg",
              RenderTimeSpaceSvg(tl.Samples(),
                                 DiagramFor(cfg, fmt::format(
                                                     "{} seed {}",
                                                     StrategyName(tl.strategy),
                                                     cfg.scenario.seed))));
    if (a.conflicts) {
      std::vector<Trajectory> trajs;
      for (const VehicleRecord& r : tl.records) {
        if (r.trajectory) trajs.push_back(*r.trajectory);
      }
      out.Write("conflicts.csv", Capture([&](auto& os) {
                  WriteConflictsCsv(
                      os, DetectAllConflicts(trajs,
                                             cfg.scenario.params.vehicle_length,
                                             cfg.scenario.safety,
                                             cfg.scenario.urgency));
                }));
    }
    if (a.free_flow) {
      const Timeline ff = RunFreeFlow(cfg.scenario);
      out.Write("timeline_free_flow.csv",
                Capture([&](auto& os) { WriteTimelineCsv(os, ff); }));
      out.Write("diagram_free_flow.svg",
                RenderTimeSpaceSvg(ff.Samples(),
                                   DiagramFor(cfg, "free flow, unadjusted")));
      if (a.conflicts) {
        std::vector<Trajectory> trajs;
        for (const VehicleRecord& r : ff.records) trajs.push_back(*r.trajectory);
        out.Write("conflicts_free_flow.csv", Capture([&](auto& os) {
                    WriteConflictsCsv(
                        os, DetectAllConflicts(
                                trajs, cfg.scenario.params.vehicle_length,
                                cfg.scenario.safety, cfg.scenario.urgency));
                  }));
      }
    }
    return 0;
  });
  std::cout << DelayReportText(report);
  std::cout << fmt::format("outputs in {}\n", a.out_dir);
  return 0;
}

struct MatrixArgs {
  std::string config;
  int jobs = 1;
  bool resume = false;
  bool overwrite = false;
  std::string out_dir = "out";
};

std::string CellFile(const ScenarioConfig& c) {
  return fmt::format("cells/{}_{}_{}_seed{}.json", c.mainline_volume,
                     c.ramp_volume, StrategyName(c.strategy), c.seed);
}

std::string CellDigest(const ScenarioConfig& c) {
  return fmt::format("{:016x}",
                     Fnv1a(ResolvedConfigText(RunConfig{c, MatrixSpec{}})));
}

int CmdMatrix(const MatrixArgs& a) {
  const RunConfig cfg = LoadWithOverrides(a.config, std::nullopt, "");
  const OutputDir out = Stage(
      "output", [&] { return OutputDir(a.out_dir, a.overwrite || a.resume); });
  if (!a.resume && !a.overwrite && fs::exists(out.Path("matrix.csv"))) {
    throw StageError{"output",
                     fmt::format("{} already exists; pass --resume or "
                                 "--overwrite",
                                 out.Path("matrix.csv").string())};
  }
  auto lookup = [&](const ScenarioConfig& c) -> std::optional<DelayReport> {
    if (!a.resume) return std::nullopt;
    std::ifstream in(out.Path(CellFile(c)));
    if (!in) return std::nullopt;
    try {
      const nlohmann::json j = nlohmann::json::parse(in);
      if (j.at("config_digest").get<std::string>() != CellDigest(c)) {
        return std::nullopt;
      }
      return DelayReportFromJson(j.at("report"));
    } catch (const std::exception&) {
      return std::nullopt;
    }
  };
  std::size_t done = 0;
  const std::size_t total = cfg.matrix.RunCount();
  auto on_done = [&](const DelayReport& r) {
    ScenarioConfig c = cfg.scenario;
    c.script.clear();
    c.mainline_volume = r.mainline_volume;
    c.ramp_volume = r.ramp_volume;
    c.strategy = r.strategy;
    c.seed = r.seed;
    nlohmann::json j;
    j["config_digest"] = CellDigest(c);
    j["report"] = DelayReportToJson(r);
    OutputDir::WriteFile(out.Path(CellFile(c)), j.dump(1) + "\n", true);
    std::cerr << fmt::format("[{}/{}] {} seed {}\n", ++done, total, r.label,
                             r.seed);
  };
  const std::vector<DelayReport> reports = Stage("simulation", [&] {
    return RunMatrix(cfg.scenario, cfg.matrix, a.jobs, lookup, on_done);
  });
  const MatrixSummary summary =
      Stage("metrics", [&] { return SummarizeMatrix(reports, cfg.matrix); });
  const auto trend = BaselineRampTrendViolations(summary, cfg.matrix);
  Stage("output", [&] {
    out.Write("matrix.csv",
              Capture([&](auto& os) { WriteMatrixCsv(os, reports); }), true);
    out.Write("cells.csv",
              Capture([&](auto& os) { WriteCellSummaryCsv(os, summary); }),
              true);
    out.Write("mainline_delay.csv", Capture([&](auto& os) {
                WriteBarChartCsv(os, summary, cfg.matrix,
                                 VehicleClass::kMainline);
              }),
              true);
    out.Write("ramp_delay.csv", Capture([&](auto& os) {
                WriteBarChartCsv(os, summary, cfg.matrix, VehicleClass::kRamp);
              }),
              true);
    out.Write("ordering.txt", OrderingSummaryText(summary), true);
    out.Write("report.txt", MatrixReportText(cfg, summary, trend), true);
    return 0;
  });
  std::cout << OrderingSummaryText(summary);
  std::cout << fmt::format("{} runs, outputs in {}\n", reports.size(),
                           a.out_dir);
  return 0;
}

struct DiagramArgs {
  std::string timeline;
  std::string output = "diagram.svg";
  std::string zoom;
  std::optional<double> merge_point;
  std::string title;
  bool overwrite = false;
};

int CmdDiagram(const DiagramArgs& a) {
  const std::vector<StateSample> samples = Stage("input", [&] {
    std::ifstream in(a.timeline);
    if (!in) {
      throw MergeError(ErrorCode::kMalformedTimeline,
                       fmt::format("cannot read timeline '{}'", a.timeline));
    }
    return ReadTimelineCsv(in);
  });
  DiagramOptions opt;
  opt.title = a.title;
  opt.merge_point = a.merge_point;
  if (!a.zoom.empty()) {
    opt.zoom = Stage("arguments", [&] { return ParseZoom(a.zoom); });
  }
  Stage("output", [&] {
    OutputDir::WriteFile(a.output, RenderTimeSpaceSvg(samples, opt),
                         a.overwrite);
    return 0;
  });
  std::cout << fmt::format("wrote {} ({} samples)\n", a.output, samples.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"On-ramp merge simulator and cooperative trajectory planner"};
  app.require_subcommand(1);

  RunArgs run;
  CLI::App* run_cmd = app.add_subcommand("run", "Run one scenario");
  run_cmd->add_option("--config", run.config, "Scenario config (INI)")
      ->required();
  run_cmd->add_option("--seed", run.seed, "Override scenario.seed");
  run_cmd->add_option("--strategy", run.strategy,
                      "Override scenario.strategy: mainline_priority, "
                      "ramp_priority or baseline");
  run_cmd->add_option("--out-dir", run.out_dir, "Output directory")
      ->capture_default_str();
  run_cmd->add_flag("--overwrite", run.overwrite, "Replace existing outputs");
  run_cmd->add_flag("--free-flow", run.free_flow,
                    "Also write the unadjusted free-flow timeline and diagram");
  run_cmd->add_flag("--conflicts", run.conflicts,
                    "Write every remaining same-stream conflict");

  MatrixArgs matrix;
  CLI::App* matrix_cmd =
      app.add_subcommand("matrix", "Run every volume cell, strategy and seed");
  matrix_cmd->add_option("--config", matrix.config, "Scenario config (INI)")
      ->required();
  matrix_cmd->add_option("--jobs", matrix.jobs, "Concurrent runs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  matrix_cmd->add_flag("--resume", matrix.resume,
                       "Reuse finished cells from a previous run");
  matrix_cmd->add_flag("--overwrite", matrix.overwrite,
                       "Replace existing outputs");
  matrix_cmd->add_option("--out-dir", matrix.out_dir, "Output directory")
      ->capture_default_str();

  DiagramArgs diagram;
  CLI::App* diagram_cmd =
      app.add_subcommand("diagram", "Render a timeline as a time-space SVG");
  diagram_cmd->add_option("--timeline", diagram.timeline, "timeline.csv")
      ->required();
  diagram_cmd->add_option("--out", diagram.output, "SVG path")
      ->capture_default_str();
  diagram_cmd->add_option("--zoom", diagram.zoom, "Window t0:t1:s0:s1");
  diagram_cmd->add_option("--merge-point", diagram.merge_point,
                          "Station of the merge point, m");
  diagram_cmd->add_option("--title", diagram.title, "Diagram title");
  diagram_cmd->add_flag("--overwrite", diagram.overwrite,
                        "Replace an existing SVG");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return CmdRun(run);
    if (*matrix_cmd) return CmdMatrix(matrix);
    if (*diagram_cmd) return CmdDiagram(diagram);
  } catch (const StageError& e) {
    std::cerr << fmt::format("rampmerge: {} failed: {}\n", e.stage, e.message);
    return 1;
  }
  return 2;
}
