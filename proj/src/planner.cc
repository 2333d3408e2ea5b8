#include "rampmerge/planner.h"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "rampmerge/errors.h"

namespace rampmerge {
namespace {

using TrajRefs = std::vector<const Trajectory*>;

struct SearchResult {
  double x = 0.0;
  Trajectory traj;
};

bool InMergeStream(const Trajectory& t) {
  for (const LaneInterval& li : t.lane_schedule()) {
    if (li.lane.kind != LaneKind::kMainline || li.lane.index == 0) return true;
  }
  return false;
}

bool Overlaps(const Trajectory& a, const Trajectory& b) {
  return a.EntryTime() <= b.ExitTime() && b.EntryTime() <= a.ExitTime();
}

double RefTime(const MergeScene& scene) {
  return *scene.ramp_free_flow.MergeTime();
}

double SpeedNear(const Trajectory& t, double time) {
  if (time <= t.EntryTime()) return t.EntrySpeed();
  if (time >= t.ExitTime()) return t.segments().back().end_speed();
  return t.SpeedAt(time);
}

PairCheckOptions PlanningOptions(const MergeScene& scene) {
  PairCheckOptions opts;
  opts.extra_margin = scene.ctx.planner.planning_margin;
  return opts;
}

TrajRefs ConflictsIn(const MergeScene& scene, const Trajectory& t,
                     const TrajRefs& pool, const PairCheckOptions& opts) {
  TrajRefs bad;
  for (const Trajectory* other : pool) {
    if (other->id() == t.id() || !Overlaps(t, *other)) continue;
    if (CheckPair(t, *other, scene.ctx.params.vehicle_length,
                  scene.ctx.safety, scene.ctx.urgency, opts)) {
      bad.push_back(other);
    }
  }
  return bad;
}

// First grid value that passes, refined by bisection against the preceding
// grid value when both lie on the same branch of the parameterization.
template <typename Pass, typename SameBranch>
std::optional<double> FirstPassing(const std::vector<double>& grid, Pass pass,
                                   SameBranch same_branch) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!pass(grid[i])) continue;
    if (i == 0 || !same_branch(grid[i - 1], grid[i])) return grid[i];
    double lo = grid[i - 1];
    double hi = grid[i];
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (pass(mid)) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    return hi;
  }
  return std::nullopt;
}

// Smallest parameter whose trajectory clears the whole pool. The search runs
// against a small active set that grows with whatever the candidate still
// conflicts with, which keeps the pairwise checks few.
template <typename Build, typename SameBranch>
std::optional<SearchResult> LazySearch(const MergeScene& scene,
                                       const std::vector<double>& grid,
                                       SameBranch same_branch, Build build,
                                       const TrajRefs& pool,
                                       TrajRefs active = {}) {
  const PairCheckOptions opts = PlanningOptions(scene);
  std::set<const Trajectory*> seen(active.begin(), active.end());
  for (std::size_t round = 0; round <= pool.size(); ++round) {
    auto pass = [&](double x) {
      std::optional<Trajectory> t = build(x);
      return t && ConflictsIn(scene, *t, active, opts).empty();
    };
    std::optional<double> x = FirstPassing(grid, pass, same_branch);
    if (!x) return std::nullopt;
    Trajectory t = *build(*x);
    TrajRefs bad = ConflictsIn(scene, t, pool, opts);
    if (bad.empty()) return SearchResult{*x, std::move(t)};
    bool grew = false;
    for (const Trajectory* b : bad) {
      if (seen.insert(b).second) {
        active.push_back(b);
        grew = true;
      }
    }
    if (!grew) return std::nullopt;
  }
  return std::nullopt;
}

// Deceleration, hold and recovery that puts the vehicle `loss` meters behind
// its previous law at t_hold. The recovery mirrors the deceleration.
std::optional<SpeedAdjustment> AdjustmentForLoss(double t_start, double t_hold,
                                                 double loss, double a_nominal,
                                                 double a_cap) {
  const double w = t_hold - t_start;
  if (!(w > 0.0) || loss < 0.0) return std::nullopt;
  if (loss == 0.0) return SpeedAdjustment{};
  double a = a_nominal;
  double t1;
  if (w * w >= 2.0 * loss / a_nominal) {
    t1 = w - std::sqrt(w * w - 2.0 * loss / a_nominal);
  } else {
    a = 2.0 * loss / (w * w);
    t1 = w;
    if (a > a_cap) return std::nullopt;
  }
  return SpeedAdjustment{t_start, -a, t1, w - t1, a, t1};
}

class Workspace {
 public:
  explicit Workspace(const MergeScene& scene) {
    for (const SceneVehicle& v : scene.vehicles) current_.push_back(v.committed);
    changed_.assign(current_.size(), false);
  }

  const Trajectory& at(std::size_t i) const { return current_[i]; }
  bool changed(std::size_t i) const { return changed_[i]; }
  std::size_t size() const { return current_.size(); }

  void Set(std::size_t i, Trajectory t) {
    current_[i] = std::move(t);
    changed_[i] = true;
  }

  TrajRefs Refs(const std::vector<std::size_t>& idx) const {
    TrajRefs out;
    for (std::size_t i : idx) out.push_back(&current_[i]);
    return out;
  }

 private:
  std::vector<Trajectory> current_;
  std::vector<bool> changed_;
};

std::vector<std::size_t> StreamOrder(const MergeScene& scene) {
  const double t_ref = RefTime(scene);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
    if (InMergeStream(scene.vehicles[i].committed)) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double xa = scene.vehicles[a].committed.ExtrapolatedStation(t_ref);
    const double xb = scene.vehicles[b].committed.ExtrapolatedStation(t_ref);
    if (xa != xb) return xa > xb;
    return scene.vehicles[a].committed.id() < scene.vehicles[b].committed.id();
  });
  return idx;
}

std::optional<Trajectory> RampCandidateUpTo(const MergeScene& scene, double q,
                                            double max_wait) {
  const ClassParams& params = scene.ctx.params;
  const PlannerParams& pp = scene.ctx.planner;
  const double q1 = params.vr0 * (1.0 - pp.ramp_min_speed_ratio);
  if (q < 0.0) return std::nullopt;
  RampProfile profile{scene.horizon_start, params.vr0, pp.ramp_adjust_decel,
                      -1.0};
  if (q <= q1) {
    profile.cruise_speed = params.vr0 - q;
  } else {
    profile.stop_wait = q - q1;
    if (profile.stop_wait > max_wait) return std::nullopt;
  }
  try {
    return BuildRampTrajectory(scene.ramp_entry.id,
                               scene.ramp_entry.entry_time, scene.ctx.geometry,
                               params, profile);
  } catch (const MergeError&) {
    return std::nullopt;
  }
}

std::vector<double> RampGrid(const MergeScene& scene, double max_wait) {
  const double vr0 = scene.ctx.params.vr0;
  const double q1 = vr0 * (1.0 - scene.ctx.planner.ramp_min_speed_ratio);
  std::vector<double> grid;
  const int slow_steps = std::max(1, static_cast<int>(std::ceil(q1 / 0.25)));
  for (int i = 0; i <= slow_steps; ++i) grid.push_back(q1 * i / slow_steps);
  grid.push_back(q1 + 1e-6);
  for (double w = 0.5; w <= max_wait + 1e-9; w += 0.5) grid.push_back(q1 + w);
  return grid;
}

std::optional<SearchResult> SearchRamp(const MergeScene& scene,
                                       const TrajRefs& pool,
                                       double max_wait) {
  const double q1 =
      scene.ctx.params.vr0 * (1.0 - scene.ctx.planner.ramp_min_speed_ratio);
  auto build = [&](double q) { return RampCandidateUpTo(scene, q, max_wait); };
  auto same = [q1](double a, double b) { return (a <= q1) == (b <= q1); };
  return LazySearch(scene, RampGrid(scene, max_wait), same, build, pool);
}

MotionLimits ChainLimits(const MergeScene& scene) {
  MotionLimits lim = LimitsFor(scene.ctx.params);
  lim.v_min = scene.ctx.planner.mainline_min_speed;
  return lim;
}

// Largest x in [0, hi] accepted by `ok`, assuming ok is monotone.
template <typename Ok>
double LargestAccepted(double hi, Ok ok) {
  if (ok(hi)) return hi;
  double lo = 0.0;
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ok(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

// Shifts vehicle i back (sign = +1) or forward (sign = -1) by a distance at
// t_hold, choosing the smallest shift that clears the pool.
std::optional<SearchResult> SearchShift(const MergeScene& scene,
                                        const Workspace& ws, std::size_t i,
                                        double t_hold, int sign,
                                        const TrajRefs& pool,
                                        const TrajRefs& seed) {
  const SceneVehicle& sv = scene.vehicles[i];
  const Trajectory& base = ws.at(i);
  const double t_start = std::max(sv.adjustable_from, base.EntryTime());
  const double w = t_hold - t_start;
  if (!(w > 0.0) || t_start >= base.ExitTime()) return std::nullopt;
  const MotionLimits lim = ChainLimits(scene);
  const double a_nom = scene.ctx.planner.mainline_adjust_rate;
  const double a_cap = sign > 0 ? -scene.ctx.params.a_min : scene.ctx.params.a_max;

  auto build = [&](double d) -> std::optional<Trajectory> {
    auto adj = AdjustmentForLoss(t_start, t_hold, d, a_nom, a_cap);
    if (!adj) return std::nullopt;
    const SpeedAdjustment applied = sign > 0 ? *adj : adj->Inverse();
    try {
      Trajectory t = RetimeWithSpeedAdjustment(base, applied, lim);
      if (t.ExitTime() < sv.free_flow_exit - 1e-9) return std::nullopt;
      return t;
    } catch (const MergeError&) {
      return std::nullopt;
    }
  };
  const double d_max =
      LargestAccepted(0.5 * a_cap * w * w, [&](double d) {
        return build(d).has_value();
      });
  if (!(d_max > 0.0)) return std::nullopt;
  std::vector<double> grid;
  constexpr int kSteps = 48;
  for (int j = 1; j <= kSteps; ++j) grid.push_back(d_max * j / kSteps);
  auto same = [](double, double) { return true; };
  return LazySearch(scene, grid, same, build, pool, seed);
}

// Moves chain vehicles back, in order, until each clears everything ahead.
void RunFollowerChain(const MergeScene& scene, Workspace& ws,
                      const Trajectory& ramp, double t_merge,
                      const std::vector<std::size_t>& chain,
                      const std::vector<std::size_t>& stream) {
  const PairCheckOptions opts = PlanningOptions(scene);
  std::set<std::size_t> pending(chain.begin(), chain.end());
  int adjusted = 0;
  for (std::size_t i : chain) {
    pending.erase(i);
    TrajRefs pool{&ramp};
    for (std::size_t j : stream) {
      if (j != i && !pending.count(j)) pool.push_back(&ws.at(j));
    }
    TrajRefs bad = ConflictsIn(scene, ws.at(i), pool, opts);
    if (bad.empty()) continue;
    if (++adjusted > scene.ctx.planner.cascade_cap) {
      throw MergeError(ErrorCode::kBoundsViolation,
                       fmt::format("cascade exceeds {} vehicles",
                                   scene.ctx.planner.cascade_cap));
    }
    const double t_start =
        std::max(scene.vehicles[i].adjustable_from, ws.at(i).EntryTime());
    const double t_hold = std::max(t_merge, t_start + 1.0);
    auto res = SearchShift(scene, ws, i, t_hold, +1, pool, bad);
    if (!res) {
      throw MergeError(
          ErrorCode::kBoundsViolation,
          fmt::format("vehicle {} cannot fall back far enough within its "
                      "speed and deceleration limits",
                      ws.at(i).id().value));
    }
    ws.Set(i, std::move(res->traj));
  }
}

void Verify(const MergeScene& scene, const Workspace& ws,
            const Trajectory& ramp, const std::vector<std::size_t>& stream) {
  TrajRefs all{&ramp};
  for (std::size_t j : stream) all.push_back(&ws.at(j));
  const PairCheckOptions exact;
  auto check = [&](const Trajectory& t) {
    TrajRefs bad = ConflictsIn(scene, t, all, exact);
    if (!bad.empty()) {
      throw MergeError(ErrorCode::kBoundsViolation,
                       fmt::format("plan leaves vehicles {} and {} too close",
                                   t.id().value, bad.front()->id().value));
    }
  };
  check(ramp);
  for (std::size_t j : stream) {
    if (ws.changed(j)) check(ws.at(j));
  }
  if (ramp.ExitTime() < scene.ramp_free_flow.ExitTime() - 1e-9) {
    throw MergeError(ErrorCode::kBoundsViolation,
                     "ramp vehicle would beat its free-flow exit");
  }
  for (std::size_t j = 0; j < ws.size(); ++j) {
    if (ws.changed(j) &&
        ws.at(j).ExitTime() < scene.vehicles[j].free_flow_exit - 1e-9) {
      throw MergeError(ErrorCode::kBoundsViolation,
                       fmt::format("vehicle {} would beat its free-flow exit",
                                   ws.at(j).id().value));
    }
  }
}

Plan AssemblePlan(const MergeScene& scene, const Workspace& ws,
                  const Trajectory& ramp, bool ramp_changed,
                  PlanStrategy strategy) {
  Plan plan;
  plan.strategy = strategy;
  if (ramp_changed) {
    plan.assignments.emplace(ramp.id(), ramp);
    plan.total_adjustment_cost +=
        ramp.ExitTime() - scene.ramp_free_flow.ExitTime();
  }
  for (std::size_t j = 0; j < ws.size(); ++j) {
    if (!ws.changed(j)) continue;
    plan.assignments.emplace(ws.at(j).id(), ws.at(j));
    plan.total_adjustment_cost +=
        ws.at(j).ExitTime() - scene.vehicles[j].free_flow_exit;
  }
  plan.merge_time = *ramp.MergeTime();
  plan.merge_station = ramp.StationAt(plan.merge_time);
  return plan;
}

std::size_t PositionOf(const MergeScene& scene,
                       const std::vector<std::size_t>& order, VehicleId id) {
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (scene.vehicles[order[k]].committed.id() == id) return k;
  }
  throw MergeError(ErrorCode::kInvalidArgument,
                   fmt::format("vehicle {} is not in the merge stream",
                               id.value));
}

std::vector<std::size_t> Slice(const std::vector<std::size_t>& v,
                               std::size_t begin, std::size_t end) {
  return {v.begin() + static_cast<std::ptrdiff_t>(begin),
          v.begin() + static_cast<std::ptrdiff_t>(end)};
}

bool SameTrajectory(const Trajectory& a, const Trajectory& b) {
  const auto& sa = a.segments();
  const auto& sb = b.segments();
  if (sa.size() != sb.size()) return false;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    if (sa[i].start_time != sb[i].start_time ||
        sa[i].start_station != sb[i].start_station ||
        sa[i].start_speed != sb[i].start_speed ||
        sa[i].accel != sb[i].accel || sa[i].duration != sb[i].duration) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::string_view StrategyName(Strategy s) {
  switch (s) {
    case Strategy::kMainlinePriority:
      return "mainline_priority";
    case Strategy::kRampPriority:
      return "ramp_priority";
    case Strategy::kBaseline:
      return "baseline";
  }
  return "?";
}

std::optional<Strategy> ParseStrategy(std::string_view name) {
  for (Strategy s : {Strategy::kMainlinePriority, Strategy::kRampPriority,
                     Strategy::kBaseline}) {
    if (StrategyName(s) == name) return s;
  }
  return std::nullopt;
}

std::string_view PlanStrategyName(PlanStrategy s) {
  switch (s) {
    case PlanStrategy::kNoneNeeded:
      return "none_needed";
    case PlanStrategy::kMainlinePriority:
      return "mainline_priority";
    case PlanStrategy::kRampPriority:
      return "ramp_priority";
    case PlanStrategy::kRampYield:
      return "ramp_yield";
  }
  return "?";
}

MergeScene MakeMergeScene(const PlanningContext& ctx,
                          std::vector<CommittedVehicle> vehicles,
                          VehicleId ramp_id, double report_time) {
  VehicleState entry{ramp_id,
                     VehicleClass::kRamp,
                     Lane::Ramp(),
                     ctx.geometry.ramp_origin(),
                     ctx.params.vr0,
                     0.0,
                     report_time};
  Trajectory ff = FreeFlowTrajectory(entry, ctx.geometry, ctx.params);
  const double horizon = report_time + ctx.planner.plan_lead_time;
  std::stable_sort(vehicles.begin(), vehicles.end(),
                   [&](const CommittedVehicle& a, const CommittedVehicle& b) {
                     const double xa =
                         a.trajectory.ExtrapolatedStation(report_time);
                     const double xb =
                         b.trajectory.ExtrapolatedStation(report_time);
                     if (xa != xb) return xa > xb;
                     return a.trajectory.id() < b.trajectory.id();
                   });
  std::vector<SceneVehicle> scene_vehicles;
  for (CommittedVehicle& cv : vehicles) {
    double from = std::max(horizon, cv.trajectory.EntryTime());
    if (auto m = cv.trajectory.MergeTime()) from = std::max(from, *m);
    scene_vehicles.push_back(
        {std::move(cv.trajectory), cv.vehicle_class, cv.free_flow_exit, from});
  }
  return MergeScene{ctx, std::move(scene_vehicles), entry, std::move(ff),
                    horizon};
}

double MinimumMergeGap(const ClassParams& params, double v_merge,
                       double v_mainline, const SafetyParams& p) {
  return params.vehicle_length +
         CooperativeSafetyDistance(v_mainline, v_merge, p) +
         CooperativeSafetyDistance(v_merge, v_mainline, p);
}

std::optional<Trajectory> RampCandidate(const MergeScene& scene, double q) {
  return RampCandidateUpTo(scene, q, scene.ctx.planner.max_ramp_wait);
}

std::vector<Conflict> SceneConflicts(const MergeScene& scene,
                                     const Trajectory& ramp) {
  std::vector<Conflict> out;
  for (const SceneVehicle& v : scene.vehicles) {
    const Trajectory& t = v.committed;
    if (!InMergeStream(t) || !Overlaps(ramp, t)) continue;
    auto pv = CheckPair(ramp, t, scene.ctx.params.vehicle_length,
                        scene.ctx.safety, scene.ctx.urgency);
    if (!pv) continue;
    out.push_back({ramp.id(), t.id(), pv->first_violation_time, pv->separation,
                   pv->required, pv->urgency});
  }
  std::sort(out.begin(), out.end(), [](const Conflict& a, const Conflict& b) {
    if (a.first_violation_time != b.first_violation_time) {
      return a.first_violation_time < b.first_violation_time;
    }
    return a.mainline_vehicle_id < b.mainline_vehicle_id;
  });
  return out;
}

Plan Decide(const MergeScene& scene, Strategy strategy) {
  const std::vector<Conflict> conflicts =
      SceneConflicts(scene, scene.ramp_free_flow);
  if (conflicts.empty()) {
    Plan plan;
    plan.merge_time = *scene.ramp_free_flow.MergeTime();
    plan.merge_station = scene.ramp_free_flow.StationAt(plan.merge_time);
    return plan;
  }
  switch (strategy) {
    case Strategy::kMainlinePriority:
      return PlanMainlinePriority(scene, SelectTargetGap(scene, conflicts));
    case Strategy::kRampPriority:
      return PlanRampPriority(scene, conflicts);
    case Strategy::kBaseline:
      break;
  }
  throw MergeError(ErrorCode::kInvalidArgument,
                   "the baseline strategy does not plan merges");
}

TargetGapChoice SelectTargetGap(const MergeScene& scene,
                                const std::vector<Conflict>& conflicts) {
  if (conflicts.empty()) {
    throw MergeError(ErrorCode::kInvalidArgument,
                     "gap selection needs at least one conflict");
  }
  const std::vector<std::size_t> order = StreamOrder(scene);
  const std::size_t n = order.size();
  const std::size_t pos =
      PositionOf(scene, order, conflicts.front().mainline_vehicle_id);
  const double t_ref = RefTime(scene);
  const ClassParams& params = scene.ctx.params;
  const double v_conflicted =
      SpeedNear(scene.vehicles[order[pos]].committed, t_ref);
  const double g_min =
      MinimumMergeGap(params, params.v0, v_conflicted, scene.ctx.safety);

  struct Candidate {
    std::size_t k;  // merge between order[k-1] and order[k]
    double length;
    bool long_enough;
  };
  std::vector<Candidate> cands;
  const int r = std::max(1, scene.ctx.planner.gap_search_radius);
  const long lo = static_cast<long>(pos) - r + 1;
  const long hi = static_cast<long>(pos) + r;
  for (long k = std::max(0L, lo); k <= std::min(static_cast<long>(n), hi);
       ++k) {
    double length = std::numeric_limits<double>::infinity();
    if (k > 0 && k < static_cast<long>(n)) {
      const Trajectory& lead = scene.vehicles[order[k - 1]].committed;
      const Trajectory& follow = scene.vehicles[order[k]].committed;
      length = lead.ExtrapolatedStation(t_ref) -
               follow.ExtrapolatedStation(t_ref) - params.vehicle_length;
    }
    cands.push_back({static_cast<std::size_t>(k), length, length >= g_min});
  }

  auto choice_for = [&](const Candidate& c, bool adequate) {
    TargetGapChoice choice;
    if (c.k > 0) choice.leader_id = scene.vehicles[order[c.k - 1]].committed.id();
    if (c.k < n) choice.follower_id = scene.vehicles[order[c.k]].committed.id();
    choice.gap_length_at_merge = c.length;
    choice.adequate = adequate;
    choice.requires_mainline_adjustment = !adequate;
    return choice;
  };
  auto longer = [](const Candidate& a, const Candidate& b) {
    if (std::abs(a.length - b.length) > 1e-6 &&
        !(std::isinf(a.length) && std::isinf(b.length))) {
      return a.length > b.length;
    }
    return a.k < b.k;
  };

  std::vector<Candidate> adequate;
  for (const Candidate& c : cands) {
    if (c.long_enough) adequate.push_back(c);
  }
  std::sort(adequate.begin(), adequate.end(), longer);
  Workspace ws(scene);
  for (const Candidate& c : adequate) {
    auto ahead = ws.Refs(Slice(order, 0, c.k));
    auto behind = ws.Refs(Slice(order, c.k, n));
    auto found = SearchRamp(scene, ahead, scene.ctx.planner.max_ramp_wait);
    if (!found) continue;
    if (ConflictsIn(scene, found->traj, behind, PlanningOptions(scene))
            .empty()) {
      return choice_for(c, true);
    }
  }

  std::vector<Candidate> pool;
  for (const Candidate& c : cands) {
    if (!c.long_enough) pool.push_back(c);
  }
  if (pool.empty()) pool = cands;
  if (pool.empty()) {
    throw MergeError(ErrorCode::kNoFeasibleGap, "no candidate gaps");
  }
  std::sort(pool.begin(), pool.end(), longer);
  return choice_for(pool.front(), false);
}

Plan PlanMainlinePriority(const MergeScene& scene,
                          const TargetGapChoice& choice) {
  const std::vector<std::size_t> order = StreamOrder(scene);
  const std::size_t n = order.size();
  std::size_t k = 0;
  if (choice.leader_id) k = PositionOf(scene, order, *choice.leader_id) + 1;
  const std::vector<std::size_t> ahead = Slice(order, 0, k);
  const std::vector<std::size_t> behind = Slice(order, k, n);

  Workspace ws(scene);
  auto found =
      SearchRamp(scene, ws.Refs(ahead), scene.ctx.planner.max_ramp_wait);
  if (!found) {
    throw MergeError(ErrorCode::kNoFeasibleGap,
                     fmt::format("ramp vehicle {} cannot fall in behind the "
                                 "chosen leader",
                                 scene.ramp_entry.id.value));
  }
  const Trajectory& ramp = found->traj;
  if (!choice.requires_mainline_adjustment) {
    if (!ConflictsIn(scene, ramp, ws.Refs(behind), PlanningOptions(scene))
             .empty()) {
      throw MergeError(ErrorCode::kNoFeasibleGap,
                       "chosen gap is not reachable by the ramp vehicle");
    }
  } else {
    RunFollowerChain(scene, ws, ramp, *ramp.MergeTime(), behind, order);
  }
  Verify(scene, ws, ramp, order);
  Plan plan = AssemblePlan(scene, ws, ramp, found->x > 0.0,
                           PlanStrategy::kMainlinePriority);
  plan.gap = choice;
  return plan;
}

Plan PlanRampPriority(const MergeScene& scene,
                      const std::vector<Conflict>& conflicts) {
  if (conflicts.empty()) {
    throw MergeError(ErrorCode::kInvalidArgument,
                     "ramp priority needs at least one conflict");
  }
  const Trajectory& ramp = scene.ramp_free_flow;
  const double t_merge = *ramp.MergeTime();
  const double x_ramp = ramp.StationAt(t_merge);
  const std::vector<std::size_t> order = StreamOrder(scene);

  std::vector<std::size_t> ahead, behind;
  for (std::size_t i : order) {
    if (scene.vehicles[i].committed.ExtrapolatedStation(t_merge) >
        x_ramp + 1e-9) {
      ahead.push_back(i);
    } else {
      behind.push_back(i);
    }
  }

  Workspace ws(scene);
  const PairCheckOptions opts = PlanningOptions(scene);
  std::vector<std::size_t> demoted;
  for (auto it = ahead.rbegin(); it != ahead.rend(); ++it) {
    const std::size_t i = *it;
    if (ConflictsIn(scene, ws.at(i), {&ramp}, opts).empty()) continue;
    const SceneVehicle& sv = scene.vehicles[i];
    if (ws.at(i).ExitTime() > sv.free_flow_exit + 1e-6) {
      TrajRefs pool{&ramp};
      for (std::size_t j : order) {
        if (j != i) pool.push_back(&ws.at(j));
      }
      const double t_start =
          std::max(sv.adjustable_from, ws.at(i).EntryTime());
      auto res = SearchShift(scene, ws, i, std::max(t_merge, t_start + 1.0),
                             -1, pool, {&ramp});
      if (res) {
        ws.Set(i, std::move(res->traj));
        continue;
      }
    }
    demoted.push_back(i);
  }
  std::reverse(demoted.begin(), demoted.end());
  std::vector<std::size_t> chain = demoted;
  chain.insert(chain.end(), behind.begin(), behind.end());
  RunFollowerChain(scene, ws, ramp, t_merge, chain, order);
  Verify(scene, ws, ramp, order);
  return AssemblePlan(scene, ws, ramp, false, PlanStrategy::kRampPriority);
}

Plan PlanRampYield(const MergeScene& scene) {
  Workspace ws(scene);
  const std::vector<std::size_t> order = StreamOrder(scene);
  const double wait = std::max(scene.ctx.planner.max_ramp_wait, 600.0);
  auto found = SearchRamp(scene, ws.Refs(order), wait);
  if (!found) {
    throw MergeError(ErrorCode::kNoFeasibleGap,
                     fmt::format("ramp vehicle {} finds no clear slot",
                                 scene.ramp_entry.id.value));
  }
  Verify(scene, ws, found->traj, order);
  return AssemblePlan(scene, ws, found->traj,
                      !SameTrajectory(found->traj, scene.ramp_free_flow),
                      PlanStrategy::kRampYield);
}

Plan ResolveMerge(const MergeScene& scene, Strategy strategy) {
  auto recoverable = [](const MergeError& e) {
    return e.code() == ErrorCode::kNoFeasibleGap ||
           e.code() == ErrorCode::kBoundsViolation;
  };
  std::string reasons;
  try {
    return Decide(scene, strategy);
  } catch (const MergeError& e) {
    if (!recoverable(e)) throw;
    reasons = e.what();
  }
  const Strategy other = strategy == Strategy::kRampPriority
                             ? Strategy::kMainlinePriority
                             : Strategy::kRampPriority;
  try {
    Plan plan = Decide(scene, other);
    plan.fallback_reason = reasons;
    return plan;
  } catch (const MergeError& e) {
    if (!recoverable(e)) throw;
    reasons += "; ";
    reasons += e.what();
  }
  Plan plan = PlanRampYield(scene);
  plan.fallback_reason = reasons;
  return plan;
}

}  // namespace rampmerge
