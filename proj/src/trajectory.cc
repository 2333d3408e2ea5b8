#include "rampmerge/trajectory.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "rampmerge/errors.h"

namespace rampmerge {
namespace {

constexpr double kTol = Trajectory::kContiguityTolerance;

// Time offset within a segment at which its station reaches start + ds.
// Stable form of the quadratic root; returns nullopt if never reached.
std::optional<double> OffsetForDistance(const Segment& seg, double ds) {
  if (ds <= 0.0) return 0.0;
  const double v = seg.start_speed;
  const double a = seg.accel;
  if (std::abs(a) < 1e-15) {
    if (v <= 0.0) return std::nullopt;
    return ds / v;
  }
  const double disc = v * v + 2.0 * a * ds;
  if (disc < 0.0) return std::nullopt;
  const double denom = v + std::sqrt(disc);
  if (denom <= 0.0) return std::nullopt;
  return 2.0 * ds / denom;
}

// First instant the trajectory is at station s (no stall check).
double FirstTimeAtStation(const std::vector<Segment>& segs, double s) {
  for (const Segment& seg : segs) {
    if (seg.end_station() + 1e-12 < s) continue;
    auto tau = OffsetForDistance(seg, s - seg.start_station);
    if (!tau) return seg.end_time();
    return seg.start_time + std::clamp(*tau, 0.0, seg.duration);
  }
  return segs.back().end_time();
}

void PushSegment(std::vector<Segment>& segs, double& t, double& s, double& v,
                 double accel, double duration) {
  if (!(duration > 0.0)) return;
  Segment seg{t, s, v, accel, duration};
  segs.push_back(seg);
  t = seg.end_time();
  s = seg.end_station();
  v = seg.end_speed();
}

std::vector<Segment> Normalize(const std::vector<Segment>& in) {
  std::vector<Segment> out;
  for (const Segment& seg : in) {
    if (!out.empty() && std::abs(out.back().accel - seg.accel) <= 1e-12) {
      out.back().duration = seg.end_time() - out.back().start_time;
      continue;
    }
    out.push_back(seg);
  }
  return out;
}

}  // namespace

std::string_view VehicleClassName(VehicleClass cls) {
  return cls == VehicleClass::kRamp ? "ramp" : "mainline";
}

std::optional<VehicleClass> ParseVehicleClass(std::string_view name) {
  if (name == "ramp") return VehicleClass::kRamp;
  if (name == "mainline") return VehicleClass::kMainline;
  return std::nullopt;
}

std::string LaneName(Lane lane) {
  switch (lane.kind) {
    case LaneKind::kRamp:
      return "ramp";
    case LaneKind::kAcceleration:
      return "accel";
    case LaneKind::kMainline:
      return fmt::format("main{}", lane.index);
  }
  return "?";
}

std::optional<Lane> ParseLane(std::string_view name) {
  if (name == "ramp") return Lane::Ramp();
  if (name == "accel") return Lane::Acceleration();
  if (name.substr(0, 4) == "main" && name.size() > 4) {
    int index = 0;
    auto digits = name.substr(4);
    auto [ptr, ec] =
        std::from_chars(digits.data(), digits.data() + digits.size(), index);
    if (ec == std::errc() && ptr == digits.data() + digits.size() &&
        index >= 0) {
      return Lane::Mainline(index);
    }
  }
  return std::nullopt;
}

bool SameStream(Lane a, Lane b) {
  const bool a_main = a.kind == LaneKind::kMainline;
  const bool b_main = b.kind == LaneKind::kMainline;
  if (a_main != b_main) return false;
  return !a_main || a.index == b.index;
}

void ValidateClassParams(const ClassParams& p) {
  auto fail = [](const std::string& msg) {
    throw MergeError(ErrorCode::kInvalidArgument, msg);
  };
  if (!(p.v0 > 0.0) || !(p.vr0 > 0.0)) fail("cruise speeds must be positive");
  if (p.vr0 > p.v0) fail("ramp cruise speed exceeds mainline cruise speed");
  if (!(p.a_r > 0.0)) fail("acceleration-lane rate must be positive");
  if (!(p.a_min < 0.0 && p.a_max > 0.0)) fail("need a_min < 0 < a_max");
  if (p.a_r > p.a_max) fail("acceleration-lane rate exceeds a_max");
  if (p.v0 > p.v_max) fail("mainline cruise speed exceeds v_max");
  if (p.vehicle_length < 0.0) fail("vehicle length is negative");
  if (p.ramp_speed_limit > 0.0 && p.vr0 > p.ramp_speed_limit) {
    fail("ramp cruise speed exceeds the ramp speed limit");
  }
}

MotionLimits LimitsFor(const ClassParams& p) {
  return MotionLimits{0.0, p.v_max, p.a_min, p.a_max};
}

Trajectory::Trajectory(VehicleId id, std::vector<Segment> segments,
                       std::vector<LaneInterval> lanes,
                       SpeedContinuity continuity)
    : id_(id),
      segments_(std::move(segments)),
      lanes_(std::move(lanes)),
      continuity_(continuity) {
  if (segments_.empty()) {
    throw MergeError(ErrorCode::kInvalidArgument,
                     fmt::format("vehicle {}: trajectory has no segments",
                                 id_.value));
  }
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment& seg = segments_[i];
    if (!(seg.duration >= 0.0) || !std::isfinite(seg.accel)) {
      throw MergeError(ErrorCode::kInvalidArgument,
                       fmt::format("vehicle {}: bad segment {}", id_.value, i));
    }
    if (seg.start_speed < -kTol || seg.end_speed() < -kTol) {
      throw MergeError(
          ErrorCode::kBoundsViolation,
          fmt::format("vehicle {}: negative speed in segment {}", id_.value,
                      i));
    }
    if (i == 0) continue;
    const Segment& prev = segments_[i - 1];
    bool ok = std::abs(prev.end_time() - seg.start_time) <= kTol &&
              std::abs(prev.end_station() - seg.start_station) <= kTol;
    if (continuity_ == SpeedContinuity::kContinuous) {
      ok = ok && std::abs(prev.end_speed() - seg.start_speed) <= kTol;
    }
    if (!ok) {
      throw MergeError(
          ErrorCode::kInvalidArgument,
          fmt::format("vehicle {}: segments {} and {} are not contiguous",
                      id_.value, i - 1, i));
    }
  }
  if (lanes_.empty()) {
    throw MergeError(ErrorCode::kInvalidArgument,
                     fmt::format("vehicle {}: empty lane schedule", id_.value));
  }
  for (std::size_t i = 1; i < lanes_.size(); ++i) {
    if (std::abs(lanes_[i].begin - lanes_[i - 1].end) > kTol) {
      throw MergeError(
          ErrorCode::kInvalidArgument,
          fmt::format("vehicle {}: lane schedule has a hole", id_.value));
    }
  }
}

void Trajectory::CheckDomain(double t) const {
  if (t < EntryTime() - kTol || t > ExitTime() + kTol || std::isnan(t)) {
    throw MergeError(
        ErrorCode::kOutOfDomain,
        fmt::format("vehicle {}: t={} outside [{}, {}]", id_.value, t,
                    EntryTime(), ExitTime()));
  }
}

std::size_t Trajectory::SegmentIndexAt(double t) const {
  auto it = std::upper_bound(
      segments_.begin(), segments_.end(), t,
      [](double value, const Segment& seg) { return value < seg.start_time; });
  if (it == segments_.begin()) return 0;
  return static_cast<std::size_t>(it - segments_.begin()) - 1;
}

double Trajectory::StationAt(double t) const {
  CheckDomain(t);
  return segments_[SegmentIndexAt(t)].StationAt(t);
}

double Trajectory::SpeedAt(double t) const {
  CheckDomain(t);
  return segments_[SegmentIndexAt(t)].SpeedAt(t);
}

double Trajectory::AccelAt(double t) const {
  CheckDomain(t);
  return segments_[SegmentIndexAt(t)].accel;
}

Lane Trajectory::LaneAt(double t) const {
  CheckDomain(t);
  for (const LaneInterval& li : lanes_) {
    if (t < li.end) return li.lane;
  }
  return lanes_.back().lane;
}

double Trajectory::TimeAtStation(double s) const {
  if (std::isnan(s) || s < EntryStation() - kTol || s > ExitStation() + kTol) {
    throw MergeError(
        ErrorCode::kOutOfDomain,
        fmt::format("vehicle {}: station {} outside [{}, {}]", id_.value, s,
                    EntryStation(), ExitStation()));
  }
  for (const Segment& seg : segments_) {
    const bool standing = seg.duration > 0.0 && seg.start_speed <= 0.0 &&
                          seg.accel <= 0.0;
    if (standing && std::abs(seg.start_station - s) <= kTol) {
      throw MergeError(
          ErrorCode::kStalledAtStation,
          fmt::format("vehicle {}: stands still at station {}", id_.value, s));
    }
  }
  for (const Segment& seg : segments_) {
    if (seg.end_station() < s) continue;
    auto tau = OffsetForDistance(seg, s - seg.start_station);
    if (!tau) continue;
    return seg.start_time + std::clamp(*tau, 0.0, seg.duration);
  }
  return ExitTime();
}

std::optional<double> Trajectory::MergeTime() const {
  if (lanes_.front().lane.kind == LaneKind::kMainline) return std::nullopt;
  for (const LaneInterval& li : lanes_) {
    if (li.lane.kind == LaneKind::kMainline) return li.begin;
  }
  return std::nullopt;
}

std::optional<double> Trajectory::MergeStation() const {
  auto t = MergeTime();
  if (!t) return std::nullopt;
  return StationAt(*t);
}

Trajectory Trajectory::Shifted(double dt) const {
  std::vector<Segment> segs = segments_;
  for (Segment& seg : segs) seg.start_time += dt;
  std::vector<LaneInterval> lanes = lanes_;
  for (LaneInterval& li : lanes) {
    li.begin += dt;
    li.end += dt;
  }
  return Trajectory(id_, std::move(segs), std::move(lanes), continuity_);
}

double Trajectory::ExtrapolatedStation(double t) const {
  if (t <= EntryTime()) {
    return EntryStation() - EntrySpeed() * (EntryTime() - t);
  }
  if (t >= ExitTime()) {
    return ExitStation() + segments_.back().end_speed() * (t - ExitTime());
  }
  return segments_[SegmentIndexAt(t)].StationAt(t);
}

Trajectory FreeFlowTrajectory(const VehicleState& entry,
                              const RoadGeometry& geom,
                              const ClassParams& params) {
  if (entry.vehicle_class == VehicleClass::kRamp) {
    if (std::abs(entry.station - geom.ramp_origin()) > kTol ||
        std::abs(entry.speed - params.vr0) > kTol) {
      throw MergeError(ErrorCode::kInvalidArgument,
                       fmt::format("ramp vehicle {} must enter at the ramp "
                                   "origin with the ramp cruise speed",
                                   entry.id.value));
    }
    RampProfile profile{entry.entry_time, params.vr0, 1.0, -1.0};
    return BuildRampTrajectory(entry.id, entry.entry_time, geom, params,
                               profile);
  }
  if (std::abs(entry.station - geom.mainline_entry_station) > kTol ||
      std::abs(entry.speed - params.v0) > kTol) {
    throw MergeError(ErrorCode::kInvalidArgument,
                     fmt::format("mainline vehicle {} must enter at the "
                                 "section start with the mainline speed",
                                 entry.id.value));
  }
  const Lane lane = entry.lane.kind == LaneKind::kMainline
                        ? entry.lane
                        : Lane::Mainline(0);
  const double duration =
      (geom.mainline_length - geom.mainline_entry_station) / params.v0;
  Segment seg{entry.entry_time, geom.mainline_entry_station, params.v0, 0.0,
              duration};
  return Trajectory(entry.id, {seg},
                    {{entry.entry_time, seg.end_time(), lane}});
}

Trajectory BuildRampTrajectory(VehicleId id, double entry_time,
                               const RoadGeometry& geom,
                               const ClassParams& params,
                               const RampProfile& profile) {
  const double vr0 = params.vr0;
  const double v0 = params.v0;
  const double max_decel = -params.a_min;
  double t = entry_time;
  double s = geom.ramp_origin();
  double v = vr0;
  std::vector<Segment> segs;

  auto bounds = [&](const std::string& msg) {
    return MergeError(ErrorCode::kBoundsViolation,
                      fmt::format("ramp vehicle {}: {}", id.value, msg));
  };

  const double target = std::clamp(profile.cruise_speed, 0.0, vr0);
  if (target < vr0 - 1e-12 && profile.stop_wait < 0.0) {
    const double t_adj = std::max(profile.adjust_start, entry_time);
    const double s_adj = s + vr0 * (t_adj - entry_time);
    const double room = geom.accel_lane_start - s_adj;
    double decel = profile.adjust_decel;
    if (room <= 0.0) throw bounds("no ramp left to adjust speed");
    if ((vr0 * vr0 - target * target) / (2.0 * decel) > room) {
      decel = (vr0 * vr0 - target * target) / (2.0 * room);
    }
    if (decel > max_decel + 1e-12) throw bounds("ramp deceleration too large");
    if (target <= 0.0) throw bounds("ramp cruise speed must stay positive");
    PushSegment(segs, t, s, v, 0.0, t_adj - t);
    PushSegment(segs, t, s, v, -decel, (vr0 - target) / decel);
    v = target;
  }

  double t_ramp_end;
  double a = params.a_r;
  if (profile.stop_wait >= 0.0) {
    const double t_adj = std::max(profile.adjust_start, entry_time);
    const double s_adj = s + vr0 * (t_adj - entry_time);
    const double room = geom.accel_lane_start - s_adj;
    if (room <= 0.0) throw bounds("no ramp left to stop");
    double decel = profile.adjust_decel;
    if (v * v / (2.0 * decel) > room) decel = v * v / (2.0 * room);
    if (decel > max_decel + 1e-12) throw bounds("ramp stop too abrupt");
    const double cruise = (room - v * v / (2.0 * decel)) / v;
    PushSegment(segs, t, s, v, 0.0, (t_adj - t) + cruise);
    PushSegment(segs, t, s, v, -decel, v / decel);
    v = 0.0;
    PushSegment(segs, t, s, v, 0.0, profile.stop_wait);
    t_ramp_end = t;
    if (v0 * v0 / (2.0 * a) > geom.accel_lane_length) {
      a = v0 * v0 / (2.0 * geom.accel_lane_length);
      if (a > params.a_max + 1e-12) {
        throw MergeError(ErrorCode::kAccelLaneTooShort,
                         fmt::format("ramp vehicle {}: cannot reach mainline "
                                     "speed from a standstill",
                                     id.value));
      }
    }
  } else {
    PushSegment(segs, t, s, v, 0.0, (geom.accel_lane_start - s) / v);
    t_ramp_end = t;
    if ((v0 * v0 - v * v) / (2.0 * a) > geom.accel_lane_length + kTol) {
      throw MergeError(
          ErrorCode::kAccelLaneTooShort,
          fmt::format("ramp vehicle {}: mainline speed not reachable before "
                      "the merge point",
                      id.value));
    }
  }
  PushSegment(segs, t, s, v, a, (v0 - v) / a);
  const double t_merge = t;
  PushSegment(segs, t, s, v, 0.0, (geom.mainline_length - s) / v0);

  std::vector<LaneInterval> lanes;
  lanes.push_back({entry_time, t_ramp_end, Lane::Ramp()});
  if (t_merge > t_ramp_end) {
    lanes.push_back({t_ramp_end, t_merge, Lane::Acceleration()});
  }
  lanes.push_back({t_merge, segs.back().end_time(), Lane::Mainline(0)});
  return Trajectory(id, std::move(segs), std::move(lanes));
}

SpeedAdjustment SpeedAdjustment::Inverse() const {
  SpeedAdjustment inv = *this;
  inv.accel = -accel;
  inv.recovery_accel = -recovery_accel;
  return inv;
}

Trajectory RetimeWithSpeedAdjustment(const Trajectory& traj,
                                     const SpeedAdjustment& adj,
                                     const MotionLimits& limits) {
  struct Window {
    double begin, end, delta;
  };
  std::vector<Window> windows;
  if (adj.duration < 0.0 || adj.hold_duration < 0.0 ||
      adj.recovery_duration < 0.0) {
    throw MergeError(ErrorCode::kInvalidArgument,
                     "speed adjustment with negative duration");
  }
  const double hold_end = adj.start_time + adj.duration + adj.hold_duration;
  if (adj.duration > 0.0 && adj.accel != 0.0) {
    windows.push_back({adj.start_time, adj.start_time + adj.duration,
                       adj.accel});
  }
  if (adj.recovery_duration > 0.0 && adj.recovery_accel != 0.0) {
    windows.push_back(
        {hold_end, hold_end + adj.recovery_duration, adj.recovery_accel});
  }
  if (windows.empty()) return traj;

  const double t_first = windows.front().begin;
  if (t_first < traj.EntryTime() - kTol || t_first > traj.ExitTime()) {
    throw MergeError(ErrorCode::kOutOfDomain,
                     fmt::format("vehicle {}: adjustment starts at {} outside "
                                 "the trajectory",
                                 traj.id().value, t_first));
  }
  for (const Window& w : windows) {
    if (w.delta < limits.a_min - limits.a_max - 1e-12 ||
        w.delta > limits.a_max - limits.a_min + 1e-12) {
      throw MergeError(ErrorCode::kBoundsViolation,
                       fmt::format("vehicle {}: adjustment of {} m/s^2 out of "
                                   "range",
                                   traj.id().value, w.delta));
    }
  }

  const auto& base = traj.segments();
  std::vector<Segment> out;
  for (const Segment& seg : base) {
    if (seg.end_time() <= t_first) {
      out.push_back(seg);
    } else {
      if (seg.start_time < t_first) {
        Segment head = seg;
        head.duration = t_first - seg.start_time;
        out.push_back(head);
      }
      break;
    }
  }

  std::vector<double> marks;
  for (const Segment& seg : base) {
    if (seg.start_time > t_first) marks.push_back(seg.start_time);
  }
  if (traj.ExitTime() > t_first) marks.push_back(traj.ExitTime());
  for (const Window& w : windows) {
    marks.push_back(w.begin);
    marks.push_back(w.end);
  }
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());

  const double target = traj.ExitStation();
  double t = t_first;
  double s = base[traj.SegmentIndexAt(t_first)].StationAt(t_first);
  double v = base[traj.SegmentIndexAt(t_first)].SpeedAt(t_first);
  bool reached = false;

  auto violation = [&](const std::string& what) {
    return MergeError(ErrorCode::kBoundsViolation,
                      fmt::format("vehicle {}: {} at t={:.3f}",
                                  traj.id().value, what, t));
  };

  for (double mark : marks) {
    if (mark <= t) continue;
    const double mid = 0.5 * (t + mark);
    double a = mid < traj.ExitTime() ? base[traj.SegmentIndexAt(mid)].accel
                                     : 0.0;
    for (const Window& w : windows) {
      if (mid > w.begin && mid < w.end) a += w.delta;
    }
    if (a < limits.a_min - 1e-9 || a > limits.a_max + 1e-9) {
      throw violation(fmt::format("acceleration {:.4f} outside limits", a));
    }
    Segment seg{t, s, v, a, mark - t};
    if (seg.end_station() >= target) {
      auto tau = OffsetForDistance(seg, target - s);
      seg.duration = tau ? std::clamp(*tau, 0.0, seg.duration) : seg.duration;
      reached = true;
    }
    const double v_end = seg.end_speed();
    if (v_end < limits.v_min - 1e-9 || v_end > limits.v_max + 1e-9) {
      throw violation(fmt::format("speed {:.4f} outside limits", v_end));
    }
    if (seg.duration > 0.0) out.push_back(seg);
    t = seg.end_time();
    s = seg.end_station();
    v = v_end;
    if (reached) break;
  }
  if (!reached) {
    if (v <= 0.0) throw violation("vehicle stops before its exit");
    if (target - s > 0.0) out.push_back({t, s, v, 0.0, (target - s) / v});
  }
  out = Normalize(out);

  std::vector<LaneInterval> lanes = traj.lane_schedule();
  const double new_exit = out.back().end_time();
  for (std::size_t i = 1; i < lanes.size(); ++i) {
    if (lanes[i].begin <= t_first) continue;
    const double station = traj.StationAt(lanes[i].begin);
    const double remapped = FirstTimeAtStation(out, station);
    lanes[i].begin = remapped;
    lanes[i - 1].end = remapped;
  }
  lanes.back().end = new_exit;
  return Trajectory(traj.id(), std::move(out), std::move(lanes),
                    traj.continuity());
}

double ContiguityResidual(const Trajectory& traj) {
  double worst = 0.0;
  const auto& segs = traj.segments();
  for (std::size_t i = 1; i < segs.size(); ++i) {
    worst = std::max(worst,
                     std::abs(segs[i - 1].end_time() - segs[i].start_time));
    worst = std::max(worst, std::abs(segs[i - 1].end_station() -
                                     segs[i].start_station));
    if (traj.continuity() == SpeedContinuity::kContinuous) {
      worst = std::max(worst,
                       std::abs(segs[i - 1].end_speed() - segs[i].start_speed));
    }
  }
  return worst;
}

}  // namespace rampmerge
