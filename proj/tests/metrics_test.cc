#include "rampmerge/metrics.h"

#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "rampmerge/errors.h"
#include "rampmerge/report_io.h"
#include "test_support.h"

namespace rampmerge {
namespace {

VehicleRecord Rec(std::int64_t id, VehicleClass cls, double entry, double exit,
                  double ff_exit, bool measured = true) {
  VehicleRecord r;
  r.id = VehicleId{id};
  r.vehicle_class = cls;
  r.scheduled_entry = r.entry_time = entry;
  r.exit_time = exit;
  r.free_flow_exit = ff_exit;
  r.measured = measured;
  r.completed = true;
  return r;
}

TEST(AverageDelay, ArithmeticMean) {
  Timeline tl;
  tl.records = {Rec(1, VehicleClass::kRamp, 0.0, 102.5, 100.0),
                Rec(2, VehicleClass::kRamp, 5.0, 105.0, 105.0),
                Rec(3, VehicleClass::kMainline, 1.0, 109.0, 109.0)};
  EXPECT_DOUBLE_EQ(AverageDelay(tl, VehicleClass::kRamp), 1.25);
  EXPECT_EQ(AverageDelay(tl, VehicleClass::kMainline), 0.0);
}

TEST(AverageDelay, SkipsUnmeasuredAndUnfinished) {
  Timeline tl;
  tl.records = {Rec(1, VehicleClass::kRamp, 0.0, 110.0, 100.0, false),
                Rec(2, VehicleClass::kRamp, 5.0, 106.0, 105.0)};
  VehicleRecord stuck = Rec(3, VehicleClass::kRamp, 6.0, 500.0, 106.0);
  stuck.completed = false;
  tl.records.push_back(stuck);
  EXPECT_DOUBLE_EQ(AverageDelay(tl, VehicleClass::kRamp), 1.0);
}

TEST(AverageDelay, EmptyStream) {
  Timeline tl;
  tl.records = {Rec(1, VehicleClass::kMainline, 0.0, 108.0, 108.0)};
  try {
    AverageDelay(tl, VehicleClass::kRamp);
    FAIL();
  } catch (const MergeError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyStream);
  }
}

TEST(AverageDelay, TranslationInvariant) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    Timeline tl;
    const int n = testing::UniformInt(rng, 1, 30);
    for (int i = 0; i < n; ++i) {
      // Delays on a 1/64 s grid and entries on a 1/8 s grid keep every sum
      // exact, so the shift must not change a single bit.
      const double entry = 0.125 * testing::UniformInt(rng, 0, 4000);
      const double ff = entry + 108.0;
      const double delay = testing::UniformInt(rng, 0, 640) / 64.0;
      tl.records.push_back(Rec(i + 1,
                               i % 2 ? VehicleClass::kRamp
                                     : VehicleClass::kMainline,
                               entry, ff + delay, ff));
    }
    tl.records.push_back(Rec(99, VehicleClass::kRamp, 0.0, 100.0, 100.0));
    tl.records.push_back(Rec(98, VehicleClass::kMainline, 0.0, 100.0, 100.0));
    Timeline shifted = tl;
    const double c = 0.125 * testing::UniformInt(rng, -800, 800);
    for (VehicleRecord& r : shifted.records) {
      r.scheduled_entry += c;
      r.entry_time += c;
      r.exit_time += c;
      r.free_flow_exit += c;
    }
    for (VehicleClass s : {VehicleClass::kMainline, VehicleClass::kRamp}) {
      EXPECT_EQ(AverageDelay(tl, s), AverageDelay(shifted, s));
    }
  }
}

TEST(AverageDelay, ConflictFreeCooperativeRunIsZero) {
  ScenarioConfig c;
  c.duration = 60.0;
  c.warmup = 0.0;
  // Ramp vehicle lands far away from both mainline vehicles.
  c.script = {{0.0, VehicleClass::kMainline, 0},
              {20.0, VehicleClass::kMainline, 0},
              {testing::RampEntryFor(0.0, 9.0), VehicleClass::kRamp, 0}};
  const Timeline tl = rampmerge::Run(c);
  EXPECT_EQ(AverageDelay(tl, VehicleClass::kMainline), 0.0);
  EXPECT_EQ(AverageDelay(tl, VehicleClass::kRamp), 0.0);
}

TEST(DelayReport, BaselineRampWaitsLongerAtHighVolume) {
  ScenarioConfig c;
  c.strategy = Strategy::kBaseline;
  c.mainline_volume = 1800.0;
  c.ramp_volume = 500.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    c.seed = seed;
    const DelayReport r = RunScenario(c);
    ASSERT_TRUE(r.ramp_delay && r.mainline_delay);
    EXPECT_GT(*r.ramp_delay, *r.mainline_delay) << "seed " << seed;
    EXPECT_EQ(r.completed + r.still_active, r.vehicles);
  }
}

TEST(DelayReport, CountsMatchTheTimeline) {
  ScenarioConfig c;
  c.duration = 300.0;
  c.warmup = 100.0;
  const Timeline tl = rampmerge::Run(c);
  const DelayReport r = MakeDelayReport(c, tl);
  int ml = 0, rp = 0;
  for (const VehicleRecord& v : tl.records) {
    if (!v.measured) continue;
    (v.vehicle_class == VehicleClass::kRamp ? rp : ml) += 1;
  }
  EXPECT_EQ(r.mainline_count, ml);
  EXPECT_EQ(r.ramp_count, rp);
  EXPECT_EQ(r.vehicles, static_cast<int>(tl.records.size()));
  EXPECT_EQ(r.still_active, 0);
  ASSERT_TRUE(r.mainline_delay && r.ramp_delay);
  EXPECT_GE(*r.mainline_delay, 0.0);
  EXPECT_GE(*r.ramp_delay, 0.0);
  EXPECT_EQ(r.label, "1200/300/mainline_priority");
}

// Synthetic reports: delay = base[strategy] + seed / 10.
std::vector<DelayReport> Synthetic(const MatrixSpec& spec,
                                   std::map<Strategy, double> ml_base,
                                   std::map<Strategy, double> rp_base) {
  std::vector<DelayReport> out;
  for (double ml : spec.mainline_volumes) {
    for (double rv : spec.ramp_volumes) {
      for (Strategy s : spec.strategies) {
        for (std::uint64_t seed : spec.seeds) {
          DelayReport r;
          r.mainline_volume = ml;
          r.ramp_volume = rv;
          r.strategy = s;
          r.seed = seed;
          r.mainline_delay = ml_base[s] + static_cast<double>(seed) / 10.0;
          r.ramp_delay = rp_base[s] + static_cast<double>(seed) / 10.0;
          r.min_separation = 10.0 + static_cast<double>(seed);
          out.push_back(r);
        }
      }
    }
  }
  return out;
}

TEST(SummarizeMatrix, FullGridHas27Cells) {
  const MatrixSpec spec;
  EXPECT_EQ(spec.RunCount(), 81u);
  const auto reports = Synthetic(
      spec,
      {{Strategy::kMainlinePriority, 1.0}, {Strategy::kRampPriority, 2.0},
       {Strategy::kBaseline, 3.0}},
      {{Strategy::kMainlinePriority, 1.0}, {Strategy::kRampPriority, 2.0},
       {Strategy::kBaseline, 3.0}});
  const MatrixSummary m = SummarizeMatrix(reports, spec);
  ASSERT_EQ(m.cells.size(), 27u);
  for (const MatrixCell& c : m.cells) {
    ASSERT_TRUE(c.mainline.mean && c.mainline.min && c.mainline.max);
    EXPECT_NEAR(*c.mainline.mean - *c.mainline.min, 0.1, 1e-12);
    EXPECT_NEAR(*c.mainline.max - *c.mainline.mean, 0.1, 1e-12);
    EXPECT_EQ(c.min_separation, 11.0);
    EXPECT_EQ(c.seeds.size(), 3u);
  }
  ASSERT_EQ(m.ordering.size(), 9u);
  for (const VolumeOrdering& o : m.ordering) {
    EXPECT_TRUE(o.mainline_strict);
    EXPECT_TRUE(o.mainline_weak);
    EXPECT_TRUE(o.mainline_mp_lowest);
    EXPECT_TRUE(o.ramp_baseline_highest);
    EXPECT_TRUE(o.ramp_mp_not_above_rp);
  }
}

TEST(SummarizeMatrix, MissingCellIsNamed) {
  const MatrixSpec spec;
  auto reports = Synthetic(spec, {}, {});
  reports.erase(std::remove_if(reports.begin(), reports.end(),
                               [](const DelayReport& r) {
                                 return r.mainline_volume == 1200.0 &&
                                        r.ramp_volume == 500.0 &&
                                        r.strategy == Strategy::kRampPriority &&
                                        r.seed == 2;
                               }),
                reports.end());
  try {
    SummarizeMatrix(reports, spec);
    FAIL();
  } catch (const MergeError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIncompleteMatrix);
    EXPECT_NE(std::string(e.what()).find("1200/500/ramp_priority"),
              std::string::npos)
        << e.what();
  }
}

TEST(SummarizeMatrix, OrderingFlagsFollowTheMeans) {
  const MatrixSpec spec;
  // Ramp priority equal to mainline priority: weak holds, strict does not.
  auto reports = Synthetic(
      spec,
      {{Strategy::kMainlinePriority, 1.0}, {Strategy::kRampPriority, 1.0},
       {Strategy::kBaseline, 3.0}},
      {{Strategy::kMainlinePriority, 2.0}, {Strategy::kRampPriority, 1.0},
       {Strategy::kBaseline, 0.5}});
  const MatrixSummary m = SummarizeMatrix(reports, spec);
  for (const VolumeOrdering& o : m.ordering) {
    EXPECT_FALSE(o.mainline_strict);
    EXPECT_TRUE(o.mainline_weak);
    EXPECT_TRUE(o.mainline_mp_lowest);
    EXPECT_FALSE(o.ramp_baseline_highest);
    EXPECT_FALSE(o.ramp_mp_not_above_rp);
  }
}

TEST(SummarizeMatrix, AbsentMeansFailComparisons) {
  const MatrixSpec spec;
  auto reports = Synthetic(spec, {}, {});
  for (DelayReport& r : reports) {
    if (r.strategy == Strategy::kBaseline) r.ramp_delay.reset();
  }
  const MatrixSummary m = SummarizeMatrix(reports, spec);
  EXPECT_FALSE(m.Cell(800.0, 200.0, Strategy::kBaseline).ramp.mean);
  for (const VolumeOrdering& o : m.ordering) {
    EXPECT_FALSE(o.ramp_baseline_highest);
  }
}

TEST(BaselineRampTrend, ReportsDrops) {
  const MatrixSpec spec;
  auto reports = Synthetic(spec, {}, {{Strategy::kBaseline, 5.0}});
  for (DelayReport& r : reports) {
    if (r.strategy == Strategy::kBaseline && r.mainline_volume == 800.0 &&
        r.ramp_volume == 500.0) {
      r.ramp_delay = 1.0;
    }
  }
  const auto notes = BaselineRampTrendViolations(
      SummarizeMatrix(reports, spec), spec);
  ASSERT_EQ(notes.size(), 1u);
  EXPECT_NE(notes[0].find("mainline 800"), std::string::npos) << notes[0];
}

TEST(RunMatrix, OrderIsFixedAndLookupIsUsed) {
  ScenarioConfig base;
  base.duration = 120.0;
  base.warmup = 20.0;
  MatrixSpec spec;
  spec.mainline_volumes = {800.0, 1200.0};
  spec.ramp_volumes = {300.0};
  spec.seeds = {1, 2};
  int fresh = 0;
  const auto a = RunMatrix(base, spec, 3, {},
                           [&](const DelayReport&) { ++fresh; });
  ASSERT_EQ(a.size(), spec.RunCount());
  EXPECT_EQ(fresh, static_cast<int>(spec.RunCount()));
  std::size_t i = 0;
  for (double ml : spec.mainline_volumes) {
    for (Strategy s : spec.strategies) {
      for (std::uint64_t seed : spec.seeds) {
        EXPECT_EQ(a[i].mainline_volume, ml);
        EXPECT_EQ(a[i].strategy, s);
        EXPECT_EQ(a[i].seed, seed);
        ++i;
      }
    }
  }
  // Serve everything from the first pass; nothing should run again.
  fresh = 0;
  const auto b = RunMatrix(
      base, spec, 1,
      [&](const ScenarioConfig& c) -> std::optional<DelayReport> {
        for (const DelayReport& r : a) {
          if (r.mainline_volume == c.mainline_volume &&
              r.strategy == c.strategy && r.seed == c.seed) {
            return r;
          }
        }
        return std::nullopt;
      },
      [&](const DelayReport&) { ++fresh; });
  EXPECT_EQ(fresh, 0);
  std::ostringstream sa, sb;
  WriteMatrixCsv(sa, a);
  WriteMatrixCsv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(ReportIo, MatrixCsvHeaderAndEmptyDelay) {
  DelayReport r;
  r.mainline_volume = 800.0;
  r.ramp_volume = 200.0;
  r.strategy = Strategy::kBaseline;
  r.seed = 3;
  r.mainline_delay = 1.5;
  r.min_separation = 4.25;
  std::ostringstream os;
  WriteMatrixCsv(os, {r});
  std::istringstream in(os.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header,
            "mainline_volume,ramp_volume,strategy,seed,mainline_delay_s,"
            "ramp_delay_s,min_separation_m,faults");
  EXPECT_EQ(row.substr(0, 22), "800,200,baseline,3,1.5");
  EXPECT_NE(row.find("1.5,,4.25"), std::string::npos) << row;
}

TEST(ReportIo, DelayReportJsonRoundTrip) {
  DelayReport r;
  r.label = "x";
  r.strategy = Strategy::kRampPriority;
  r.mainline_volume = 1800.0;
  r.ramp_volume = 500.0;
  r.seed = 7;
  r.ramp_delay = 0.1 + 0.2;
  r.mainline_count = 4;
  r.vehicles = 9;
  r.completed = 9;
  r.min_separation = 3.125;
  const DelayReport back = DelayReportFromJson(DelayReportToJson(r));
  EXPECT_EQ(back.label, r.label);
  EXPECT_EQ(back.strategy, r.strategy);
  EXPECT_EQ(back.seed, r.seed);
  EXPECT_FALSE(back.mainline_delay);
  EXPECT_EQ(back.ramp_delay, r.ramp_delay);
  EXPECT_EQ(back.mainline_count, 4);
  EXPECT_EQ(back.min_separation, r.min_separation);
}

}  // namespace
}  // namespace rampmerge
