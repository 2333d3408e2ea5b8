#include "rampmerge/safety.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "rampmerge/errors.h"

namespace rampmerge {
namespace {

constexpr double kViolationTolerance = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Roots of c0 + c1 x + c2 x^2 strictly inside (lo, hi), ascending.
std::vector<double> RootsIn(double c0, double c1, double c2, double lo,
                            double hi) {
  std::vector<double> roots;
  auto keep = [&](double x) {
    if (x > lo && x < hi) roots.push_back(x);
  };
  if (std::abs(c2) < 1e-14) {
    if (std::abs(c1) > 1e-14) keep(-c0 / c1);
  } else {
    const double disc = c1 * c1 - 4.0 * c2 * c0;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double q = -0.5 * (c1 + std::copysign(sq, c1));
      if (q != 0.0) {
        keep(q / c2);
        keep(c0 / q);
      } else {
        keep(0.0);
      }
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

struct ScanResult {
  double min_margin = kInf;
  double worst_time = 0.0;
  double separation = 0.0;
  double required = 0.0;
  double closing_speed = 0.0;
  std::optional<double> first_violation;
};

struct Kin {
  double s, v, a;
};

Kin StateAt(const Trajectory& t, double time) {
  const Segment& seg = t.segments()[t.SegmentIndexAt(time)];
  return {seg.StationAt(time), seg.SpeedAt(time), seg.accel};
}

class PairScanner {
 public:
  PairScanner(double vehicle_length, const SafetyParams& p, double extra)
      : length_(vehicle_length), p_(p), extra_(extra) {}

  // Piece [t0, t0 + span] where both vehicles have constant acceleration.
  void Piece(double t0, double span, Kin a, Kin b, ScanResult& out,
             bool stop_at_first) const {
    // Split where the order or the sign of the closing speed changes.
    std::vector<double> cuts{0.0};
    for (double r : RootsIn(a.s - b.s, a.v - b.v, 0.5 * (a.a - b.a), 0.0,
                            span)) {
      cuts.push_back(r);
    }
    if (std::abs(a.a - b.a) > 1e-14) {
      const double r = -(a.v - b.v) / (a.a - b.a);
      if (r > 0.0 && r < span) cuts.push_back(r);
    }
    cuts.push_back(span);
    std::sort(cuts.begin(), cuts.end());

    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double s0 = cuts[i];
      const double len = cuts[i + 1] - s0;
      if (len < 0.0) continue;
      const double mid = s0 + 0.5 * len;
      const double ds_mid =
          (a.s - b.s) + (a.v - b.v) * mid + 0.5 * (a.a - b.a) * mid * mid;
      const Kin& f0 = ds_mid >= 0.0 ? a : b;
      const Kin& r0 = ds_mid >= 0.0 ? b : a;
      Kin front{f0.s + f0.v * s0 + 0.5 * f0.a * s0 * s0, f0.v + f0.a * s0,
                f0.a};
      Kin rear{r0.s + r0.v * s0 + 0.5 * r0.a * s0 * s0, r0.v + r0.a * s0,
               r0.a};
      const double vr_mid = rear.v + rear.a * 0.5 * len;
      const double vf_mid = front.v + front.a * 0.5 * len;
      const double k = vr_mid > vf_mid ? 1.0 : 0.0;
      const double inv2b = 1.0 / (2.0 * p_.b_max);

      const double base = length_ + p_.d0 + 2.0 * p_.gps_error + extra_;
      const double c0 = (front.s - rear.s) - base - p_.clock_error * rear.v -
                        k * (rear.v * rear.v - front.v * front.v) * inv2b;
      const double c1 = (front.v - rear.v) - p_.clock_error * rear.a -
                        k * (rear.v * rear.a - front.v * front.a) / p_.b_max;
      const double c2 = 0.5 * (front.a - rear.a) -
                        k * (rear.a * rear.a - front.a * front.a) * inv2b;
      auto f = [&](double x) { return c0 + c1 * x + c2 * x * x; };

      double arg = 0.0;
      double fmin = f(0.0);
      if (f(len) < fmin) {
        arg = len;
        fmin = f(len);
      }
      if (c2 > 0.0) {
        const double xv = -c1 / (2.0 * c2);
        if (xv > 0.0 && xv < len && f(xv) < fmin) {
          arg = xv;
          fmin = f(xv);
        }
      }

      if (fmin < out.min_margin) {
        const double x = arg;
        const double vr = rear.v + rear.a * x;
        const double vf = front.v + front.a * x;
        const double gap = (front.s + front.v * x + 0.5 * front.a * x * x) -
                           (rear.s + rear.v * x + 0.5 * rear.a * x * x) -
                           length_;
        out.min_margin = fmin;
        out.worst_time = t0 + s0 + x;
        out.separation = gap;
        out.required = gap - fmin;
        out.closing_speed = vr - vf;
      }

      if (!out.first_violation && fmin < -kViolationTolerance) {
        if (f(0.0) < -kViolationTolerance) {
          out.first_violation = t0 + s0;
        } else {
          double lo = 0.0;
          double hi = arg;
          for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
            const double m = 0.5 * (lo + hi);
            if (f(m) < -kViolationTolerance) {
              hi = m;
            } else {
              lo = m;
            }
          }
          out.first_violation = t0 + s0 + hi;
        }
        if (stop_at_first) return;
      }
    }
  }

 private:
  double length_;
  const SafetyParams& p_;
  double extra_;
};

ScanResult Scan(const Trajectory& a, const Trajectory& b,
                double vehicle_length, const SafetyParams& p,
                const PairCheckOptions& opts, bool stop_at_first) {
  ScanResult out;
  const double lo =
      std::max({a.EntryTime(), b.EntryTime(), opts.window_start});
  const double hi = std::min({a.ExitTime(), b.ExitTime(), opts.window_end});
  if (lo > hi) return out;

  std::vector<double> marks{lo, hi};
  auto add = [&](double t) {
    if (t > lo && t < hi) marks.push_back(t);
  };
  for (const Trajectory* t : {&a, &b}) {
    for (const Segment& seg : t->segments()) add(seg.start_time);
    for (const LaneInterval& li : t->lane_schedule()) add(li.begin);
  }
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());

  PairScanner scanner(vehicle_length, p, opts.extra_margin);
  if (marks.size() == 1) {
    if (SameStream(a.LaneAt(lo), b.LaneAt(lo))) {
      scanner.Piece(lo, 0.0, StateAt(a, lo), StateAt(b, lo), out,
                    stop_at_first);
    }
    return out;
  }
  for (std::size_t i = 0; i + 1 < marks.size(); ++i) {
    const double t0 = marks[i];
    const double t1 = marks[i + 1];
    const double mid = 0.5 * (t0 + t1);
    if (!SameStream(a.LaneAt(mid), b.LaneAt(mid))) continue;
    const Segment& sa = a.segments()[a.SegmentIndexAt(mid)];
    const Segment& sb = b.segments()[b.SegmentIndexAt(mid)];
    scanner.Piece(t0, t1 - t0,
                  {sa.StationAt(t0), sa.SpeedAt(t0), sa.accel},
                  {sb.StationAt(t0), sb.SpeedAt(t0), sb.accel}, out,
                  stop_at_first);
    if (stop_at_first && out.first_violation) break;
  }
  return out;
}

}  // namespace

void ValidateSafetyParams(const SafetyParams& p) {
  if (p.d0 < 0.0 || !(p.b_max > 0.0) || p.gps_error < 0.0 ||
      p.clock_error < 0.0 || !(p.sampling_tolerance > 0.0)) {
    throw MergeError(ErrorCode::kInvalidArgument,
                     "safety parameters out of range");
  }
}

double CooperativeSafetyDistance(double v_follower, double v_leader,
                                 const SafetyParams& p) {
  const double braking = std::max(
      0.0, (v_follower * v_follower - v_leader * v_leader) / (2.0 * p.b_max));
  return p.d0 + braking + 2.0 * p.gps_error + v_follower * p.clock_error;
}

double ConflictUrgency(double gap, double v_rel, const UrgencyParams& p) {
  if (gap <= 0.0) return kInf;
  if (v_rel <= 0.0) return 0.0;
  const double a_urgent = v_rel * v_rel / (2.0 * gap);
  const double a_collision = v_rel / p.t_pulse;
  return a_collision * a_urgent;
}

std::optional<PairViolation> CheckPair(const Trajectory& a,
                                       const Trajectory& b,
                                       double vehicle_length,
                                       const SafetyParams& p,
                                       const UrgencyParams& up,
                                       const PairCheckOptions& opts) {
  const ScanResult r = Scan(a, b, vehicle_length, p, opts, false);
  if (!r.first_violation) return std::nullopt;
  PairViolation v;
  v.first = a.id();
  v.second = b.id();
  v.first_violation_time = *r.first_violation;
  v.worst_time = r.worst_time;
  v.min_margin = r.min_margin;
  v.separation = r.separation;
  v.required = r.required;
  v.urgency = ConflictUrgency(r.separation, r.closing_speed, up);
  return v;
}

double MinimumMargin(const Trajectory& a, const Trajectory& b,
                     double vehicle_length, const SafetyParams& p,
                     const PairCheckOptions& opts) {
  return Scan(a, b, vehicle_length, p, opts, false).min_margin;
}

std::vector<Conflict> DetectConflicts(const Trajectory& ramp,
                                      std::span<const Trajectory> mainline,
                                      const RoadGeometry& geom,
                                      const SafetyParams& p,
                                      const ClassParams& params,
                                      const UrgencyParams& up) {
  const auto merge_time = ramp.MergeTime();
  if (!merge_time) {
    throw MergeError(ErrorCode::kInvalidArgument,
                     fmt::format("vehicle {} never merges", ramp.id().value));
  }
  const double merge_station = ramp.StationAt(*merge_time);
  if (merge_station < geom.accel_lane_start - 1e-6 ||
      merge_station > geom.merge_point + 1e-6) {
    throw MergeError(ErrorCode::kInvalidArgument,
                     fmt::format("vehicle {} merges at station {:.3f}, "
                                 "outside the acceleration lane",
                                 ramp.id().value, merge_station));
  }
  std::vector<Conflict> out;
  PairCheckOptions opts;
  opts.window_start = *merge_time;
  for (const Trajectory& m : mainline) {
    if (m.ExitTime() < *merge_time) {
      throw MergeError(
          ErrorCode::kWindowTooShort,
          fmt::format("mainline vehicle {} leaves at {:.3f} before vehicle "
                      "{} merges at {:.3f}",
                      m.id().value, m.ExitTime(), ramp.id().value,
                      *merge_time));
    }
    auto v = CheckPair(ramp, m, params.vehicle_length, p, up, opts);
    if (!v) continue;
    out.push_back({ramp.id(), m.id(), v->first_violation_time, v->separation,
                   v->required, v->urgency});
  }
  std::sort(out.begin(), out.end(), [](const Conflict& x, const Conflict& y) {
    if (x.first_violation_time != y.first_violation_time) {
      return x.first_violation_time < y.first_violation_time;
    }
    return x.mainline_vehicle_id < y.mainline_vehicle_id;
  });
  return out;
}

std::vector<PairViolation> DetectAllConflicts(
    std::span<const Trajectory> trajs, double vehicle_length,
    const SafetyParams& p, const UrgencyParams& up,
    const PairCheckOptions& opts) {
  std::vector<PairViolation> out;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    for (std::size_t j = i + 1; j < trajs.size(); ++j) {
      if (trajs[i].ExitTime() < trajs[j].EntryTime() ||
          trajs[j].ExitTime() < trajs[i].EntryTime()) {
        continue;
      }
      if (auto v = CheckPair(trajs[i], trajs[j], vehicle_length, p, up,
                             opts)) {
        out.push_back(*v);
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const PairViolation& x, const PairViolation& y) {
              if (x.first_violation_time != y.first_violation_time) {
                return x.first_violation_time < y.first_violation_time;
              }
              if (x.first != y.first) return x.first < y.first;
              return x.second < y.second;
            });
  return out;
}

}  // namespace rampmerge
