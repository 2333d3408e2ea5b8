#include "rampmerge/trajectory.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rampmerge/errors.h"
#include "test_support.h"

namespace rampmerge {
namespace {

using testing::DefaultGeometry;
using testing::kV0;
using testing::kVr0;
using testing::Uniform;

template <typename F>
ErrorCode CodeOf(F&& f) {
  try {
    f();
  } catch (const MergeError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

// Random speed-continuous trajectory with non-negative speeds throughout.
Trajectory RandomTrajectory(std::mt19937_64& rng, std::int64_t id) {
  const int n = 1 + static_cast<int>(rng() % 6);
  double t = Uniform(rng, 0.0, 100.0);
  double s = Uniform(rng, 0.0, 500.0);
  double v = Uniform(rng, 0.0, 35.0);
  std::vector<Segment> segs;
  for (int i = 0; i < n; ++i) {
    double a = Uniform(rng, -3.0, 2.5);
    double d = Uniform(rng, 0.1, 20.0);
    if (a < 0.0) d = std::min(d, v / -a);
    if (!(d > 0.0)) {
      a = Uniform(rng, 0.0, 2.5);
      d = Uniform(rng, 0.1, 20.0);
    }
    Segment seg{t, s, v, a, d};
    segs.push_back(seg);
    t = seg.end_time();
    s = seg.end_station();
    v = std::max(0.0, seg.end_speed());
  }
  return Trajectory(VehicleId{id}, segs,
                    {{segs.front().start_time, t, Lane::Mainline(0)}});
}

TEST(FreeFlow, MainlineStationAfterTenSeconds) {
  const Trajectory t = testing::Mainline(1, 0.0);
  EXPECT_NEAR(t.StationAt(10.0), 277.778, 1e-3);
  EXPECT_NEAR(t.StationAt(10.0), 10.0 * kV0, 1e-12);
  EXPECT_EQ(t.segments().size(), 1u);
  EXPECT_DOUBLE_EQ(t.ExitStation(), 3000.0);
  EXPECT_FALSE(t.MergeTime().has_value());
}

TEST(FreeFlow, RampAccelerationPhase) {
  const Trajectory t = testing::RampFreeFlow(1, 0.0);
  const auto& segs = t.segments();
  ASSERT_EQ(segs.size(), 3u);
  EXPECT_EQ(segs[1].accel, 2.0);
  const double duration = (kV0 - kVr0) / 2.0;
  const double length = (kV0 * kV0 - kVr0 * kVr0) / (2.0 * 2.0);
  EXPECT_NEAR(segs[1].duration, duration, 1e-9 * duration);
  EXPECT_NEAR(segs[1].end_station() - segs[1].start_station, length,
              1e-9 * length);
  EXPECT_NEAR(segs[1].duration, 5.5556, 1e-4);
  EXPECT_NEAR(segs[1].end_station() - segs[1].start_station, 123.457, 1e-3);
  // Ramp cruise ends exactly at the start of the acceleration lane.
  EXPECT_NEAR(segs[0].end_station(), 1000.0, 1e-9);
  // Lane change at the station where v0 is reached.
  ASSERT_TRUE(t.MergeStation().has_value());
  EXPECT_NEAR(*t.MergeStation(), 1000.0 + length, 1e-9);
  EXPECT_EQ(t.LaneAt(0.0), Lane::Ramp());
  EXPECT_EQ(t.LaneAt(segs[1].start_time + 1.0), Lane::Acceleration());
  EXPECT_EQ(t.LaneAt(t.ExitTime()), Lane::Mainline(0));
}

TEST(FreeFlow, RampEndsAccelerationAtExactlyV0) {
  for (double vr_kmh : {30.0, 40.0, 55.0, 60.0, 72.5, 90.0}) {
    ClassParams p;
    p.vr0 = vr_kmh / 3.6;
    const Trajectory t = testing::RampFreeFlow(1, 3.0, DefaultGeometry(), p);
    const Segment& acc = t.segments()[1];
    EXPECT_LE(std::abs(acc.end_speed() - p.v0), 1e-12 * p.v0) << vr_kmh;
  }
}

TEST(FreeFlow, EqualCruiseSpeedsGiveNoAccelerationPhase) {
  ClassParams p;
  p.vr0 = p.v0;
  const Trajectory t = testing::RampFreeFlow(1, 0.0, DefaultGeometry(), p);
  for (const Segment& seg : t.segments()) EXPECT_EQ(seg.accel, 0.0);
  EXPECT_NEAR(*t.MergeStation(), 1000.0, 1e-9);
  EXPECT_NEAR(t.ExitTime(), 2300.0 / p.v0, 1e-9);
}

TEST(FreeFlow, AccelLaneTooShort) {
  GeometryConfig c;
  c.accel_lane_length = 100.0;  // needs 123.457 m
  const RoadGeometry g = BuildGeometry(c);
  EXPECT_EQ(CodeOf([&] { testing::RampFreeFlow(1, 0.0, g); }),
            ErrorCode::kAccelLaneTooShort);
}

TEST(FreeFlow, EntryMustMatchClassCruise) {
  const RoadGeometry g = DefaultGeometry();
  VehicleState s{VehicleId{1}, VehicleClass::kMainline, Lane::Mainline(0), 0.0,
                 20.0, 0.0, 0.0};
  EXPECT_EQ(CodeOf([&] { FreeFlowTrajectory(s, g, {}); }),
            ErrorCode::kInvalidArgument);
}

TEST(Evaluate, ConstantSpeedOver3p6Seconds) {
  const Trajectory t = testing::Mainline(1, 0.0);
  EXPECT_NEAR(t.StationAt(3.6) - t.StationAt(0.0), 100.0, 1e-9);
  EXPECT_EQ(t.StationAt(0.0), 0.0);
  EXPECT_EQ(t.SpeedAt(2.0), kV0);
}

TEST(Evaluate, AccelerationSegment) {
  const Trajectory t(VehicleId{1}, {{5.0, 10.0, kVr0, 2.0, 4.0}},
                     {{5.0, 9.0, Lane::Acceleration()}});
  EXPECT_NEAR(t.StationAt(7.0) - t.StationAt(5.0), 37.3333, 1e-4);
  EXPECT_NEAR(t.StationAt(7.0) - 10.0, 2.0 * kVr0 + 4.0, 1e-12);
  EXPECT_NEAR(t.SpeedAt(7.0), kVr0 + 4.0, 1e-12);
  EXPECT_EQ(t.StationAt(5.0), 10.0);
}

TEST(Evaluate, OutsideDomain) {
  const Trajectory t = testing::Mainline(1, 10.0);
  EXPECT_EQ(CodeOf([&] { t.StationAt(9.0); }), ErrorCode::kOutOfDomain);
  EXPECT_EQ(CodeOf([&] { t.SpeedAt(t.ExitTime() + 1.0); }),
            ErrorCode::kOutOfDomain);
}

TEST(TimeAtStation, ClosedForm) {
  const Trajectory t = testing::Mainline(1, 0.0);
  EXPECT_NEAR(t.TimeAtStation(100.0), 3.6, 1e-12);
}

TEST(TimeAtStation, BelowEntryIsOutOfDomain) {
  const Trajectory t = testing::RampFreeFlow(1, 0.0);
  EXPECT_EQ(CodeOf([&] { t.TimeAtStation(600.0); }), ErrorCode::kOutOfDomain);
  EXPECT_EQ(CodeOf([&] { t.TimeAtStation(3001.0); }),
            ErrorCode::kOutOfDomain);
}

TEST(TimeAtStation, StandingStillIsStalled) {
  const Trajectory t(VehicleId{1},
                     {{0.0, 0.0, 10.0, -2.0, 5.0},
                      {5.0, 25.0, 0.0, 0.0, 3.0},
                      {8.0, 25.0, 0.0, 2.0, 5.0}},
                     {{0.0, 13.0, Lane::Ramp()}});
  EXPECT_EQ(CodeOf([&] { t.TimeAtStation(25.0); }),
            ErrorCode::kStalledAtStation);
  EXPECT_NEAR(t.TimeAtStation(30.0), 8.0 + std::sqrt(5.0), 1e-12);
}

TEST(TimeAtStation, RoundTripRandomTimes) {
  std::mt19937_64 rng(11);
  const Trajectory ramp = testing::RampFreeFlow(1, 4.0);
  const Trajectory main = testing::Mainline(2, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Trajectory& t = (i % 2 == 0) ? ramp : main;
    const double x = Uniform(rng, t.EntryTime(), t.ExitTime());
    EXPECT_NEAR(t.TimeAtStation(t.StationAt(x)), x, 1e-9);
  }
}

TEST(Retime, ZeroDurationIsIdentity) {
  const Trajectory t = testing::RampFreeFlow(1, 0.0);
  const Trajectory r = RetimeWithSpeedAdjustment(
      t, {30.0, -1.0, 0.0, 0.0, 0.0, 0.0}, LimitsFor({}));
  ASSERT_EQ(r.segments().size(), t.segments().size());
  for (std::size_t i = 0; i < t.segments().size(); ++i) {
    EXPECT_EQ(r.segments()[i].start_time, t.segments()[i].start_time);
    EXPECT_EQ(r.segments()[i].start_station, t.segments()[i].start_station);
    EXPECT_EQ(r.segments()[i].start_speed, t.segments()[i].start_speed);
    EXPECT_EQ(r.segments()[i].accel, t.segments()[i].accel);
    EXPECT_EQ(r.segments()[i].duration, t.segments()[i].duration);
  }
}

TEST(Retime, DecelerateThenCruise) {
  const Trajectory t = testing::Mainline(1, 0.0);
  const Trajectory r = RetimeWithSpeedAdjustment(
      t, {10.0, -1.0, 2.0, 0.0, 0.0, 0.0}, LimitsFor({}));
  EXPECT_NEAR(r.SpeedAt(12.0), 25.7778, 1e-4);
  EXPECT_NEAR(r.SpeedAt(50.0), kV0 - 2.0, 1e-12);
  // Deficit is 2 m at the end of the braking window, then grows at 2 m/s.
  const double d12 = t.StationAt(12.0) - r.StationAt(12.0);
  EXPECT_NEAR(d12, 2.0, 1e-9);
  for (double x : {20.0, 40.0, 80.0}) {
    EXPECT_NEAR(t.StationAt(x) - r.StationAt(x), d12 + 2.0 * (x - 12.0), 1e-9);
  }
  EXPECT_DOUBLE_EQ(r.ExitStation(), t.ExitStation());
  EXPECT_GT(r.ExitTime(), t.ExitTime());
  // The input is untouched.
  EXPECT_EQ(t.segments().size(), 1u);
}

TEST(Retime, NegativeSpeedIsBoundsViolation) {
  const Trajectory t = testing::Mainline(1, 0.0);
  MotionLimits lim = LimitsFor({});
  lim.a_min = -20.0;
  EXPECT_EQ(CodeOf([&] {
              RetimeWithSpeedAdjustment(t, {10.0, -10.0, 5.0, 0, 0, 0}, lim);
            }),
            ErrorCode::kBoundsViolation);
  EXPECT_EQ(CodeOf([&] {
              RetimeWithSpeedAdjustment(t, {10.0, -10.0, 5.0, 0, 0, 0},
                                        LimitsFor({}));
            }),
            ErrorCode::kBoundsViolation);
}

TEST(Retime, InverseRestoresOriginal) {
  std::mt19937_64 rng(5);
  const MotionLimits lim = LimitsFor({});
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    const Trajectory t = (i % 2 == 0)
                             ? testing::Mainline(1, Uniform(rng, 0, 50))
                             : testing::RampFreeFlow(2, Uniform(rng, 0, 50));
    SpeedAdjustment adj;
    adj.start_time = t.EntryTime() + Uniform(rng, 1.0, 40.0);
    adj.accel = -Uniform(rng, 0.2, 1.5);
    adj.duration = Uniform(rng, 0.5, 4.0);
    adj.hold_duration = Uniform(rng, 0.0, 5.0);
    adj.recovery_accel = -adj.accel;
    adj.recovery_duration = adj.duration;
    Trajectory r = t;
    try {
      r = RetimeWithSpeedAdjustment(t, adj, lim);
    } catch (const MergeError& e) {
      EXPECT_EQ(e.code(), ErrorCode::kBoundsViolation);
      continue;
    }
    const Trajectory back = RetimeWithSpeedAdjustment(r, adj.Inverse(), lim);
    EXPECT_LE(ContiguityResidual(r), 1e-9);
    EXPECT_NEAR(back.ExitTime(), t.ExitTime(), 1e-9);
    for (int k = 0; k <= 50; ++k) {
      const double x = t.EntryTime() + (t.ExitTime() - t.EntryTime()) * k / 50;
      EXPECT_NEAR(back.StationAt(std::min(x, back.ExitTime())),
                  t.StationAt(x), 1e-9);
      EXPECT_NEAR(back.SpeedAt(std::min(x, back.ExitTime())), t.SpeedAt(x),
                  1e-9);
    }
    ++checked;
  }
  EXPECT_GT(checked, 400);
}

TEST(Retime, ContiguityAfterRandomAdjustments) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    const Trajectory t = testing::RampFreeFlow(1, Uniform(rng, 0, 20));
    SpeedAdjustment adj;
    adj.start_time = t.EntryTime() + Uniform(rng, 0.0, 60.0);
    adj.accel = Uniform(rng, -2.0, 1.0);
    adj.duration = Uniform(rng, 0.0, 5.0);
    adj.hold_duration = Uniform(rng, 0.0, 10.0);
    adj.recovery_accel = Uniform(rng, -1.0, 1.0);
    adj.recovery_duration = Uniform(rng, 0.0, 5.0);
    try {
      const Trajectory r =
          RetimeWithSpeedAdjustment(t, adj, LimitsFor({}));
      EXPECT_LE(ContiguityResidual(r), 1e-9);
      EXPECT_NEAR(r.ExitStation(), t.ExitStation(), 1e-9);
    } catch (const MergeError& e) {
      EXPECT_TRUE(e.code() == ErrorCode::kBoundsViolation ||
                  e.code() == ErrorCode::kOutOfDomain);
    }
  }
}

TEST(TrajectoryProperty, StationNonDecreasing) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10000; ++i) {
    const Trajectory t = RandomTrajectory(rng, i);
    EXPECT_LE(ContiguityResidual(t), 1e-9);
    double t1 = Uniform(rng, t.EntryTime(), t.ExitTime());
    double t2 = Uniform(rng, t.EntryTime(), t.ExitTime());
    if (t1 > t2) std::swap(t1, t2);
    ASSERT_GE(t.StationAt(t2), t.StationAt(t1)) << "trajectory " << i;
    ASSERT_GE(t.SpeedAt(t2), -1e-9);
  }
}

TEST(TrajectoryProperty, ConstructorRejectsGaps) {
  EXPECT_EQ(CodeOf([] {
              Trajectory(VehicleId{1},
                         {{0.0, 0.0, 10.0, 0.0, 1.0},
                          {1.0, 10.1, 10.0, 0.0, 1.0}},
                         {{0.0, 2.0, Lane::Mainline(0)}});
            }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([] {
              Trajectory(VehicleId{1}, {{0.0, 0.0, 1.0, -1.0, 2.0}},
                         {{0.0, 2.0, Lane::Mainline(0)}});
            }),
            ErrorCode::kBoundsViolation);
}

TEST(TrajectoryProperty, ShiftedMovesEveryTime) {
  const Trajectory t = testing::RampFreeFlow(1, 2.0);
  const Trajectory s = t.Shifted(3.5);
  EXPECT_NEAR(*s.MergeTime(), *t.MergeTime() + 3.5, 1e-12);
  EXPECT_NEAR(s.StationAt(20.0), t.StationAt(16.5), 1e-9);
}

TEST(Lanes, NamesRoundTrip) {
  for (Lane l : {Lane::Ramp(), Lane::Acceleration(), Lane::Mainline(0),
                 Lane::Mainline(3)}) {
    EXPECT_EQ(ParseLane(LaneName(l)), l);
  }
  EXPECT_FALSE(ParseLane("main").has_value());
  EXPECT_FALSE(ParseLane("mainx").has_value());
  EXPECT_TRUE(SameStream(Lane::Ramp(), Lane::Acceleration()));
  EXPECT_FALSE(SameStream(Lane::Ramp(), Lane::Mainline(0)));
  EXPECT_FALSE(SameStream(Lane::Mainline(0), Lane::Mainline(1)));
}

}  // namespace
}  // namespace rampmerge
