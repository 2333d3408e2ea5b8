#include "rampmerge/baseline.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <random>

#include <fmt/format.h>

#include "rampmerge/errors.h"

namespace rampmerge {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double UnitDraw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

bool InCorridor(Lane lane) { return lane.kind != LaneKind::kMainline; }

// Key grouping vehicles that follow each other: the ramp corridor or one
// mainline lane.
int StreamKey(Lane lane) { return InCorridor(lane) ? -1 : lane.index; }

struct Live {
  std::size_t result_index = 0;
  VehicleId id;
  VehicleClass cls = VehicleClass::kMainline;
  Lane lane;
  double x = 0.0;
  double v = 0.0;
  double lane_since = 0.0;
  std::vector<Segment> segs;
  std::vector<LaneInterval> lanes;
};

Trajectory Finish(const Live& car, double end_time) {
  std::vector<LaneInterval> lanes = car.lanes;
  lanes.push_back({car.lane_since, end_time, car.lane});
  std::vector<Segment> segs = car.segs;
  if (segs.empty()) segs.push_back({end_time, car.x, car.v, 0.0, 0.0});
  return Trajectory(car.id, std::move(segs), std::move(lanes),
                    SpeedContinuity::kStepwise);
}

}  // namespace

void ValidateKraussParams(const KraussParams& p) {
  if (!(p.tau > 0.0) || !(p.decel > 0.0) || !(p.accel > 0.0) ||
      p.sigma < 0.0 || p.sigma > 1.0 || p.min_gap < 0.0 ||
      !(p.desired_speed > 0.0)) {
    throw MergeError(ErrorCode::kInvalidArgument,
                     "car-following parameters out of range");
  }
}

double KraussSafeSpeed(double v_leader, double gap, const KraussParams& p) {
  const double bt = p.decel * p.tau;
  const double radicand =
      bt * bt + v_leader * v_leader + 2.0 * p.decel * (gap - p.min_gap);
  return -bt + std::sqrt(std::max(0.0, radicand));
}

double KraussStep(double v, std::optional<double> v_leader, double gap,
                  const KraussParams& p, double dt, double noise) {
  if (!(dt > 0.0)) {
    throw MergeError(ErrorCode::kInvalidArgument, "step must be positive");
  }
  double v_safe = kInf;
  if (v_leader) {
    if (gap < 0.0) {
      throw MergeError(ErrorCode::kNegativeGap,
                       fmt::format("follower overlaps its leader by {:.3f} m",
                                   -gap));
    }
    v_safe = KraussSafeSpeed(*v_leader, gap, p);
  }
  const double v_des = std::min({v + p.accel * dt, p.desired_speed, v_safe});
  return std::max(0.0, v_des - p.sigma * p.accel * dt * noise);
}

double KraussStep(const VehicleState& follower,
                  const std::optional<VehicleState>& leader,
                  const KraussParams& p, double vehicle_length, double dt,
                  double noise) {
  if (!leader) return KraussStep(follower.speed, std::nullopt, 0.0, p, dt, noise);
  const double gap = leader->station - follower.station - vehicle_length;
  return KraussStep(follower.speed, leader->speed, gap, p, dt, noise);
}

MergeDecision GapAcceptanceMerge(const VehicleState& ramp_vehicle,
                                 const std::optional<VehicleState>& lead,
                                 const std::optional<VehicleState>& lag,
                                 const BaselineParams& p,
                                 double vehicle_length) {
  const double min_gap = p.krauss.min_gap;
  if (lead) {
    const double gap = lead->station - ramp_vehicle.station - vehicle_length;
    if (gap < min_gap + ramp_vehicle.speed * p.tau_lead) {
      return MergeDecision::kWait;
    }
  }
  if (lag) {
    const double gap = ramp_vehicle.station - lag->station - vehicle_length;
    if (gap < min_gap + lag->speed * p.tau_lag) return MergeDecision::kWait;
  }
  return MergeDecision::kMergeNow;
}

BaselineResult RunBaseline(const std::vector<BaselineArrival>& arrivals,
                           const RoadGeometry& geom, const ClassParams& params,
                           const BaselineParams& bp, std::uint64_t seed,
                           double time_limit) {
  ValidateKraussParams(bp.krauss);
  const double dt = bp.step_ratio * bp.krauss.tau;
  if (!(dt > 0.0)) {
    throw MergeError(ErrorCode::kInvalidArgument, "step must be positive");
  }
  const double length = params.vehicle_length;

  BaselineResult result;
  std::map<int, std::deque<std::size_t>> queues;  // entry lane -> arrivals
  std::vector<std::size_t> order(arrivals.size());
  for (std::size_t i = 0; i < arrivals.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return arrivals[a].time < arrivals[b].time;
  });
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    const BaselineArrival& a = arrivals[i];
    result.vehicles.push_back({a.id, a.vehicle_class, a.time, false, false,
                               std::nullopt});
  }
  for (std::size_t i : order) {
    const BaselineArrival& a = arrivals[i];
    const Lane entry_lane =
        a.vehicle_class == VehicleClass::kRamp ? Lane::Ramp() : a.lane;
    queues[StreamKey(entry_lane)].push_back(i);
  }
  std::map<std::size_t, bool> blocked;

  std::mt19937_64 rng(seed);
  std::vector<Live> live;  // kept in id order
  std::size_t finished = 0;
  double t = 0.0;

  for (long step = 0;; ++step) {
    t = static_cast<double>(step) * dt;

    // Insert due arrivals behind the last vehicle of their entry stream.
    for (auto& [key, queue] : queues) {
      while (!queue.empty() && arrivals[queue.front()].time <= t) {
        const std::size_t ai = queue.front();
        const BaselineArrival& a = arrivals[ai];
        const bool ramp = a.vehicle_class == VehicleClass::kRamp;
        const double origin = ramp ? geom.ramp_origin() : 0.0;
        const double cruise = ramp ? params.vr0 : params.v0;
        double te = blocked.count(ai) ? t : a.time;
        const Live* last = nullptr;
        for (const Live& car : live) {
          if (StreamKey(car.lane) != key) continue;
          if (!last || car.x < last->x) last = &car;
        }
        if (last && te < t) {
          // Back-dating is only sound if the leader was already clear of
          // the origin at the scheduled time.
          const Segment* s = nullptr;
          for (const Segment& seg : last->segs) {
            if (seg.start_time <= te) s = &seg;
          }
          if (!s || s->StationAt(te) - origin - length < bp.krauss.min_gap) {
            te = t;
          }
        }
        double v = cruise;
        double x = origin + v * (t - te);
        if (last) {
          const double room = last->x - origin - length;
          if (room < bp.krauss.min_gap) {
            blocked[ai] = true;
            break;
          }
          v = std::min(v, KraussSafeSpeed(last->v, room, bp.krauss));
          x = std::min(origin + v * (t - te),
                       std::max(origin, last->x - length - bp.krauss.min_gap));
        }
        Live car;
        car.result_index = ai;
        car.id = a.id;
        car.cls = a.vehicle_class;
        car.lane = ramp ? Lane::Ramp() : a.lane;
        car.v = v;
        car.lane_since = te;
        if (x > origin && t > te) {
          car.segs.push_back({te, origin, (x - origin) / (t - te), 0.0, t - te});
          car.x = car.segs.back().end_station();
        } else {
          car.x = origin;
          car.lane_since = t;
        }
        result.vehicles[ai].entered = true;
        auto pos = std::lower_bound(
            live.begin(), live.end(), car.id,
            [](const Live& l, VehicleId id) { return l.id < id; });
        live.insert(pos, std::move(car));
        queue.pop_front();
      }
    }

    bool pending = false;
    for (const auto& [key, queue] : queues) pending = pending || !queue.empty();
    if ((!pending && live.empty() && finished == arrivals.size()) ||
        t >= time_limit) {
      break;
    }
    if (live.empty()) continue;

    // Synchronous speed update from the current snapshot.
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < live.size(); ++i) {
      groups[StreamKey(live[i].lane)].push_back(i);
    }
    for (auto& [key, idx] : groups) {
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (live[a].x != live[b].x) return live[a].x > live[b].x;
        return live[a].id < live[b].id;
      });
    }
    std::vector<double> v_new(live.size());
    std::vector<double> noise(live.size());
    for (std::size_t i = 0; i < live.size(); ++i) noise[i] = UnitDraw(rng);
    for (auto& [key, idx] : groups) {
      for (std::size_t k = 0; k < idx.size(); ++k) {
        Live& car = live[idx[k]];
        KraussParams kp = bp.krauss;
        kp.desired_speed =
            car.lane.kind == LaneKind::kRamp ? params.vr0 : params.v0;
        std::optional<double> v_lead;
        double gap = 0.0;
        if (k > 0) {
          const Live& lead = live[idx[k - 1]];
          v_lead = lead.v;
          gap = std::max(0.0, lead.x - car.x - length);
        }
        double v = KraussStep(car.v, v_lead, gap, kp, dt, noise[idx[k]]);
        if (key == -1) {
          // End of the acceleration lane acts as a stopped obstacle.
          const double wall = std::max(0.0, geom.merge_point - car.x);
          v = std::min(v, KraussSafeSpeed(0.0, wall, kp));
          v = std::max(0.0, v);
        }
        v_new[idx[k]] = v;
      }
    }

    for (std::size_t i = 0; i < live.size(); ++i) {
      Live& car = live[i];
      car.segs.push_back({t, car.x, v_new[i], 0.0, dt});
    }

    // Clamp any overlap behind the leader and record it as a fault.
    for (auto& [key, idx] : groups) {
      for (std::size_t k = 1; k < idx.size(); ++k) {
        Live& lead = live[idx[k - 1]];
        Live& car = live[idx[k]];
        const double lead_x = lead.segs.back().end_station();
        const double car_x = car.segs.back().end_station();
        const double gap = lead_x - car_x - length;
        if (gap < 0.0) {
          result.faults.push_back({t + dt, car.id, lead.id, gap});
          const double target = std::max(car.x, lead_x - length);
          car.segs.back().start_speed = (target - car.x) / dt;
        }
      }
    }
    for (Live& car : live) {
      car.x = car.segs.back().end_station();
      car.v = car.segs.back().start_speed;
    }

    const double t_next = t + dt;
    // Ramp end crossing: the vehicle continues on the acceleration lane.
    for (Live& car : live) {
      if (car.lane.kind == LaneKind::kRamp && car.x >= geom.accel_lane_start) {
        const Segment& s = car.segs.back();
        double tc = t_next;
        if (s.start_speed > 0.0) {
          tc = s.start_time +
               std::clamp((geom.accel_lane_start - s.start_station) /
                              s.start_speed,
                          0.0, s.duration);
        }
        car.lanes.push_back({car.lane_since, tc, car.lane});
        car.lane = Lane::Acceleration();
        car.lane_since = tc;
      }
    }
    // Gap acceptance on the acceleration lane, front vehicle first.
    std::vector<std::size_t> accel;
    for (std::size_t i = 0; i < live.size(); ++i) {
      if (live[i].lane.kind == LaneKind::kAcceleration) accel.push_back(i);
    }
    std::sort(accel.begin(), accel.end(), [&](std::size_t a, std::size_t b) {
      return live[a].x > live[b].x;
    });
    for (std::size_t i : accel) {
      Live& car = live[i];
      std::optional<VehicleState> lead, lag;
      for (const Live& other : live) {
        if (other.lane != Lane::Mainline(0)) continue;
        VehicleState st{other.id, other.cls, other.lane, other.x, other.v,
                        0.0, 0.0};
        if (other.x >= car.x) {
          if (!lead || other.x < lead->station) lead = st;
        } else if (!lag || other.x > lag->station) {
          lag = st;
        }
      }
      VehicleState me{car.id, car.cls, car.lane, car.x, car.v, 0.0, 0.0};
      if (GapAcceptanceMerge(me, lead, lag, bp, length) ==
          MergeDecision::kMergeNow) {
        car.lanes.push_back({car.lane_since, t_next, car.lane});
        car.lane = Lane::Mainline(0);
        car.lane_since = t_next;
        result.merges.emplace_back(t_next, car.id);
      }
    }

    // Exits, with the crossing time interpolated inside the step.
    for (auto it = live.begin(); it != live.end();) {
      if (it->lane.kind == LaneKind::kMainline &&
          it->x >= geom.mainline_length) {
        Segment& s = it->segs.back();
        if (s.start_speed > 0.0) {
          s.duration = std::clamp(
              (geom.mainline_length - s.start_station) / s.start_speed, 0.0,
              s.duration);
        }
        const double exit_time = s.end_time();
        if (s.duration <= 0.0 && it->segs.size() > 1) it->segs.pop_back();
        BaselineVehicleResult& res = result.vehicles[it->result_index];
        res.trajectory = Finish(*it, exit_time);
        res.completed = true;
        ++finished;
        it = live.erase(it);
      } else {
        ++it;
      }
    }
  }

  for (const Live& car : live) {
    result.vehicles[car.result_index].trajectory = Finish(car, t);
  }
  result.end_time = t;
  return result;
}

}  // namespace rampmerge
