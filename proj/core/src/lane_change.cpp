#include "stlsplit/lane_change.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "stlsplit/runner.hpp"

namespace stlsplit {

namespace {

constexpr double kFlagMargin = 100.0;  // saturated margin for pure boolean flags

double clamp(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double log_normal_pdf(double x, double mean, double sigma) {
  static const double kLogSqrt2Pi = 0.9189385332046727;
  const double z = (x - mean) / sigma;
  return -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi;
}

}  // namespace

int VehicleState::lane(double lane_width) const {
  return static_cast<int>(std::floor(d / lane_width));
}

VehicleState ObstacleScript::state_at(double time, const LaneLayout& lanes) const {
  VehicleState x = initial;
  x.s = initial.s + initial.v * time;
  const double d_from = lanes.centre(start_lane);
  const double d_to = lanes.centre(target_lane);
  double frac = 0.0;
  if (target_lane != start_lane && time > maneuver_start) {
    frac = clamp((time - maneuver_start) / maneuver_duration, 0.0, 1.0);
  }
  x.d = d_from + frac * (d_to - d_from);
  if (frac > 0.0 && frac < 1.0 && initial.v > 0.0) {
    const double lateral_rate = (d_to - d_from) / maneuver_duration;
    x.psi = std::atan2(lateral_rate, initial.v);
  }
  return x;
}

VehicleState dyn_step(const VehicleState& x, const Action& a, double dt, double wheelbase,
                      double v_max) {
  VehicleState n = x;
  // Turn-rate input mapped through the wheelbase as an equivalent steering
  // angle, then applied via the single-track heading equation.
  const double delta = (x.v > 0.1) ? std::atan(a.turn_rate * wheelbase / x.v) : 0.0;
  n.psi = x.psi + (x.v / wheelbase) * std::tan(delta) * dt;
  n.v = clamp(x.v + a.accel * dt, 0.0, v_max);
  n.s = x.s + x.v * std::cos(x.psi) * dt;
  n.d = x.d + x.v * std::sin(x.psi) * dt;
  return n;
}

std::vector<PemFeatures> pem_features(const VehicleState& ego,
                                      const std::vector<VehicleState>& obstacles) {
  std::vector<PemFeatures> out(obstacles.size());
  std::vector<double> half_angle(obstacles.size());
  for (size_t i = 0; i < obstacles.size(); ++i) {
    const double ds = obstacles[i].s - ego.s;
    const double dd = obstacles[i].d - ego.d;
    out[i].range = std::hypot(ds, dd);
    out[i].bearing = std::atan2(dd, ds);
    const double half_diag =
        0.5 * std::hypot(obstacles[i].length, obstacles[i].width);
    half_angle[i] = std::atan2(half_diag, std::max(out[i].range, 1e-6));
  }
  for (size_t i = 0; i < obstacles.size(); ++i) {
    for (size_t j = 0; j < obstacles.size(); ++j) {
      if (j == i || out[j].range >= out[i].range) continue;
      const double gap = std::abs(out[i].bearing - out[j].bearing);
      if (gap < half_angle[i] + half_angle[j]) {
        out[i].occluded = true;
        break;
      }
    }
  }
  return out;
}

std::vector<Observation> pem_observe(const VehicleState& ego,
                                     const std::vector<VehicleState>& obstacles,
                                     const PemParams& params, NoiseStream& stream,
                                     const ProposalParams* proposal, double* log_weight,
                                     std::vector<double>* noise_record) {
  const bool tilted = proposal != nullptr && !proposal->is_identity();
  const auto features = pem_features(ego, obstacles);
  std::vector<Observation> out(obstacles.size());
  for (size_t i = 0; i < obstacles.size(); ++i) {
    const double logit = params.detect_logit(features[i].range, features[i].occluded);
    const double p = logistic(logit);
    double q = p;
    if (tilted) {
      q = (1.0 - proposal->miss_rate) * logistic(logit + proposal->detect_logit_shift);
    }
    const bool detected = stream.uniform() <= q;
    // Standardized offsets are always drawn so the counter advance per step
    // does not depend on the detection outcome.
    std::array<double, 3> z;
    for (int k = 0; k < 3; ++k) {
      const double n = stream.normal();
      z[static_cast<size_t>(k)] =
          tilted ? proposal->noise_mean_shift[static_cast<size_t>(k)] +
                       proposal->noise_sigma_scale * n
                 : n;
    }
    if (tilted && log_weight) {
      *log_weight += detected ? std::log(p) - std::log(q)
                              : std::log1p(-p) - std::log1p(-q);
      if (detected) {
        // Offsets only enter the trajectory when used; unused draws carry no
        // likelihood correction and marginalize out.
        for (int k = 0; k < 3; ++k) {
          *log_weight += log_normal_pdf(z[static_cast<size_t>(k)], 0.0, 1.0) -
                         log_normal_pdf(z[static_cast<size_t>(k)],
                                        proposal->noise_mean_shift[static_cast<size_t>(k)],
                                        proposal->noise_sigma_scale);
        }
      }
    }
    if (detected) {
      const auto sig = params.sigmas(features[i].range);
      out[i].detected = true;
      out[i].s = obstacles[i].s + z[0] * sig[0];
      out[i].d = obstacles[i].d + z[1] * sig[1];
      out[i].psi = obstacles[i].psi + z[2] * sig[2];
    }
    if (noise_record) {
      noise_record->push_back(p);
      noise_record->push_back(detected ? 1.0 : 0.0);
      noise_record->push_back(z[0]);
      noise_record->push_back(z[1]);
      noise_record->push_back(z[2]);
    }
  }
  return out;
}

TrackEstimate track_init(const VehicleState& prior) {
  TrackEstimate est;
  est.mean = {prior.s, prior.d, prior.v * std::cos(prior.psi),
              prior.v * std::sin(prior.psi)};
  est.psi = prior.psi;
  for (int i = 0; i < 4; ++i) est.cov[static_cast<size_t>(i * 4 + i)] = 1.0;
  return est;
}

void track_predict(TrackEstimate& est, double dt, double process_noise) {
  // F = [[1,0,dt,0],[0,1,0,dt],[0,0,1,0],[0,0,0,1]]; P' = F P F^T + Q.
  est.mean[0] += est.mean[2] * dt;
  est.mean[1] += est.mean[3] * dt;
  auto& P = est.cov;
  auto at = [&P](int r, int c) -> double& { return P[static_cast<size_t>(r * 4 + c)]; };
  // Row update (F P), then column update (.. F^T), exploiting sparsity.
  for (int c = 0; c < 4; ++c) {
    at(0, c) += dt * at(2, c);
    at(1, c) += dt * at(3, c);
  }
  for (int r = 0; r < 4; ++r) {
    at(r, 0) += dt * at(r, 2);
    at(r, 1) += dt * at(r, 3);
  }
  const double q = process_noise * dt;
  at(0, 0) += 0.25 * q * dt;
  at(1, 1) += 0.25 * q * dt;
  at(2, 2) += q;
  at(3, 3) += q;
  est.staleness += 1;
}

void track_update(TrackEstimate& est, const Observation& obs,
                  const std::array<double, 3>& sigmas) {
  if (!obs.detected) return;
  auto& P = est.cov;
  auto at = [&P](int r, int c) -> double& { return P[static_cast<size_t>(r * 4 + c)]; };
  // H selects (s, d); S = H P H^T + R is 2x2.
  const double r0 = sigmas[0] * sigmas[0];
  const double r1 = sigmas[1] * sigmas[1];
  const double s00 = at(0, 0) + r0, s01 = at(0, 1), s10 = at(1, 0), s11 = at(1, 1) + r1;
  const double det = s00 * s11 - s01 * s10;
  if (det <= 0.0) throw std::runtime_error("track covariance not positive definite");
  const double i00 = s11 / det, i01 = -s01 / det, i10 = -s10 / det, i11 = s00 / det;
  const double y0 = obs.s - est.mean[0];
  const double y1 = obs.d - est.mean[1];
  double K[4][2];
  for (int r = 0; r < 4; ++r) {
    const double ph0 = at(r, 0), ph1 = at(r, 1);
    K[r][0] = ph0 * i00 + ph1 * i10;
    K[r][1] = ph0 * i01 + ph1 * i11;
  }
  for (int r = 0; r < 4; ++r) {
    est.mean[static_cast<size_t>(r)] += K[r][0] * y0 + K[r][1] * y1;
  }
  double newP[4][4];
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      newP[r][c] = at(r, c) - K[r][0] * at(0, c) - K[r][1] * at(1, c);
    }
  }
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) at(r, c) = newP[r][c];
  }
  est.psi = obs.psi;
  est.staleness = 0;
}

std::array<double, 4> track_forecast(const TrackEstimate& est, int i, double dt) {
  return {est.mean[0] + est.mean[2] * dt * i, est.mean[1] + est.mean[3] * dt * i,
          est.mean[2], est.mean[3]};
}

Action controller_plan(const VehicleState& ego, double a_prev, int prev_target,
                       const std::vector<TrackEstimate>& tracks,
                       const ControllerConfig& cfg, const LaneLayout& lanes, double dt,
                       int* chosen_target) {
  const double infl_s = ego.length / 2.0 + 4.5 / 2.0 + cfg.collision_margin;
  const double infl_d = ego.width / 2.0 + 2.0 / 2.0 + cfg.collision_margin;
  const double d_lo = lanes.road_min() + ego.width / 2.0;
  const double d_hi = lanes.road_max() - ego.width / 2.0;

  // Forecasts damp the estimated lateral speed (lane changes end) and keep
  // the predicted position on the road; longitudinal motion stays constant
  // velocity.
  std::vector<std::array<double, 2>> fc(tracks.size() *
                                        static_cast<size_t>(cfg.horizon));
  for (size_t ti = 0; ti < tracks.size(); ++ti) {
    double os = tracks[ti].mean[0];
    double od = tracks[ti].mean[1];
    double ovd = tracks[ti].mean[3];
    for (int k = 0; k < cfg.horizon; ++k) {
      os += tracks[ti].mean[2] * dt;
      od = clamp(od + ovd * dt, lanes.road_min(), lanes.road_max());
      ovd *= cfg.lateral_decay;
      fc[ti * static_cast<size_t>(cfg.horizon) + static_cast<size_t>(k)] = {os, od};
    }
  }

  // Rolls out one (acceleration, lane-target) pair. Returns false when a hard
  // constraint (road edge or inflated footprint overlap) is hit.
  auto rollout = [&](double a, int target, double* cost_out, Action* first_out) {
    VehicleState x = ego;
    double cost = 0.0;
    for (int k = 0; k < cfg.horizon; ++k) {
      const double d_err = lanes.centre(target) - x.d;
      const double psi_des =
          clamp(cfg.heading_gain * d_err, -cfg.max_heading, cfg.max_heading);
      const double omega = clamp(cfg.steer_gain * (psi_des - x.psi),
                                 -cfg.max_turn_rate, cfg.max_turn_rate);
      if (k == 0 && first_out) *first_out = {a, omega};
      x = dyn_step(x, {a, omega}, dt);
      if (x.d < d_lo || x.d > d_hi) return false;
      double potential = 0.0;
      for (size_t ti = 0; ti < tracks.size(); ++ti) {
        const auto& o =
            fc[ti * static_cast<size_t>(cfg.horizon) + static_cast<size_t>(k)];
        const double ds = o[0] - x.s;
        const double dd = o[1] - x.d;
        if (std::abs(ds) < infl_s && std::abs(dd) < infl_d) return false;
        // The potential field measures longitudinal distance beyond the
        // closing-speed headway, so tailgating a slower leader is costed
        // like riding next to it.
        double ds_eff = ds;
        double depth = 0.0;
        if (ds > 0.0) {
          const double headway =
              cfg.headway_time * std::max(0.0, x.v - tracks[ti].mean[2]);
          ds_eff = std::max(0.0, ds - headway);
          depth = std::max(0.0, headway - ds) * 0.1;
        }
        potential +=
            (1.0 + depth) *
            std::exp(-(ds_eff * ds_eff + 10.5 * dd * dd) / cfg.potential_scale);
      }
      const double nearest =
          lanes.centre(std::clamp(x.lane(lanes.width), 0, lanes.count - 1));
      const double jerk = (k == 0) ? a - a_prev : 0.0;
      cost += cfg.w_velocity * (x.v - cfg.v_ref) * (x.v - cfg.v_ref) +
              cfg.w_accel * a * a + cfg.w_turn * omega * omega +
              cfg.w_jerk * jerk * jerk + cfg.w_heading * x.psi * x.psi +
              cfg.w_lane_centre * (x.d - nearest) * (x.d - nearest) +
              cfg.w_obstacle * potential;
    }
    cost -= cfg.w_progress * (x.s - ego.s);
    *cost_out = cost;
    return true;
  };

  double best_cost = std::numeric_limits<double>::infinity();
  Action best{cfg.a_min, 0.0};
  double best_a = cfg.a_min;
  int best_target = -1;
  bool feasible = false;

  for (double a : cfg.accel_candidates) {
    if (a < cfg.a_min || a > cfg.a_max) continue;
    for (int target : cfg.lane_targets) {
      if (target < 0 || target >= lanes.count) continue;
      double cost;
      Action first{};
      if (!rollout(a, target, &cost, &first)) continue;
      if (target != prev_target) cost += cfg.w_switch;
      feasible = true;
      if (cost < best_cost) {
        best_cost = cost;
        best = first;
        best_a = a;
        best_target = target;
      }
    }
  }
  if (!feasible) {
    // Emergency stop still tracks the nearest lane centre so a transient
    // infeasible step cannot leave the ego drifting off the road.
    const int lane = std::clamp(ego.lane(lanes.width), 0, lanes.count - 1);
    const double d_err = lanes.centre(lane) - ego.d;
    const double psi_des =
        clamp(cfg.heading_gain * d_err, -cfg.max_heading, cfg.max_heading);
    const double omega = clamp(cfg.steer_gain * (psi_des - ego.psi),
                               -cfg.max_turn_rate, cfg.max_turn_rate);
    if (chosen_target) *chosen_target = prev_target;
    return {cfg.a_min, omega};
  }

  // Quadratic refinement of the acceleration around the winning candidate so
  // the executed command varies smoothly with the track estimates.
  if (cfg.accel_refine > 0.0) {
    const double h = cfg.accel_refine;
    double cl, cr;
    if (rollout(best_a - h, best_target, &cl, nullptr) &&
        rollout(best_a + h, best_target, &cr, nullptr)) {
      const double denom = cl - 2.0 * best_cost + cr;
      if (denom > 1e-12) {
        const double step = clamp(0.5 * h * (cl - cr) / denom, -h, h);
        const double a_ref =
            clamp(best_a + step, cfg.a_min, cfg.a_max);
        double cost;
        Action first{};
        if (rollout(a_ref, best_target, &cost, &first)) best = first;
      }
    }
  }
  if (chosen_target) *chosen_target = best_target;
  return best;
}

// ---------------------------------------------------------------------------
// Predicate margins and rule formulas
// ---------------------------------------------------------------------------

namespace {

struct StateView {
  std::span<const double> x;

  double ego_s() const { return x[0]; }
  double ego_d() const { return x[1]; }
  double ego_v() const { return x[3]; }
  double ego_a() const { return x[4]; }
  double obs_s(int i) const { return x[static_cast<size_t>(kEgoFields + kObstacleFields * i)]; }
  double obs_d(int i) const {
    return x[static_cast<size_t>(kEgoFields + kObstacleFields * i + 1)];
  }
  double obs_v(int i) const {
    return x[static_cast<size_t>(kEgoFields + kObstacleFields * i + 3)];
  }
};

}  // namespace

LaneChangeScenario::LaneChangeScenario(LaneChangeConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.obstacles.size() != 3) {
    throw std::invalid_argument("lane change scenario expects exactly 3 obstacles");
  }
  auto table = std::make_shared<PredicateTable>();
  const LaneChangeConfig c = cfg_;
  const double half_lane = c.lanes.width / 2.0;
  const double ego_half_len = c.ego_initial.length / 2.0;
  const int n_obs = static_cast<int>(c.obstacles.size());

  auto in_front_margin = [c, ego_half_len](const StateView& w, int i) {
    const double half_len = c.obstacles[static_cast<size_t>(i)].initial.length / 2.0;
    return (w.obs_s(i) - half_len) - (w.ego_s() + ego_half_len);
  };
  auto same_lane_margin = [half_lane](const StateView& w, int i) {
    return half_lane - std::abs(w.ego_d() - w.obs_d(i));
  };

  for (int i = 0; i < n_obs; ++i) {
    const std::string sfx = "_o" + std::to_string(i + 1);
    const double obs_half_w = c.obstacles[static_cast<size_t>(i)].initial.width / 2.0;

    (*table)["in_same_lane" + sfx] = [same_lane_margin, i](std::span<const double> x) {
      return same_lane_margin(StateView{x}, i);
    };
    (*table)["in_front_of" + sfx] = [in_front_margin, i](std::span<const double> x) {
      return in_front_margin(StateView{x}, i);
    };
    (*table)["cut_in" + sfx] = [c, in_front_margin, obs_half_w,
                                i](std::span<const double> x) {
      const StateView w{x};
      const int ego_lane =
          std::clamp(static_cast<int>(std::floor(w.ego_d() / c.lanes.width)), 0,
                     c.lanes.count - 1);
      const double lane_lo = ego_lane * c.lanes.width;
      const double lane_hi = lane_lo + c.lanes.width;
      const double penetration = std::min(lane_hi, w.obs_d(i) + obs_half_w) -
                                 std::max(lane_lo, w.obs_d(i) - obs_half_w);
      return std::min(penetration, in_front_margin(w, i));
    };
    (*table)["keeps_safe_distance_prec" + sfx] =
        [c, in_front_margin, i](std::span<const double> x) {
          const StateView w{x};
          const double gap = in_front_margin(w, i);
          const double v_e = w.ego_v();
          const double v_o = w.obs_v(i);
          const double d_safe = v_e * c.rules.t_react +
                                std::max(0.0, v_e * v_e - v_o * v_o) /
                                    (2.0 * c.rules.a_min_brake);
          return gap - d_safe;
        };
    (*table)["left_of" + sfx] = [c, i](std::span<const double> x) {
      const StateView w{x};
      const double lane_term = (w.obs_d(i) - w.ego_d()) / c.lanes.width - 0.5;
      // Being "left of" requires longitudinal footprint overlap; a vehicle far
      // ahead or behind in the left lane is not being overtaken.
      const double half_sum = (c.ego_initial.length +
                               c.obstacles[static_cast<size_t>(i)].initial.length) /
                              2.0;
      const double overlap = half_sum - std::abs(w.obs_s(i) - w.ego_s());
      return std::min(lane_term, overlap);
    };
    (*table)["drives_faster" + sfx] = [i](std::span<const double> x) {
      const StateView w{x};
      return w.ego_v() - w.obs_v(i);
    };
    (*table)["slightly_higher_speed" + sfx] = [c, i](std::span<const double> x) {
      const StateView w{x};
      return c.rules.dv_max - (w.ego_v() - w.obs_v(i));
    };
    (*table)["in_slow_traffic" + sfx] = [c, n_obs, i](std::span<const double> x) {
      const StateView w{x};
      double v_max = w.obs_v(i);
      for (int j = 0; j < n_obs; ++j) {
        if (j == i) continue;
        if (std::abs(w.obs_s(j) - w.obs_s(i)) <= c.rules.d_near) {
          v_max = std::max(v_max, w.obs_v(j));
        }
      }
      return c.rules.v_queue - v_max;
    };
    (*table)["on_main_carriageway" + sfx] = [](std::span<const double>) {
      return kFlagMargin;
    };
  }
  (*table)["on_access_ramp"] = [](std::span<const double>) { return -kFlagMargin; };
  (*table)["preserves_flow"] = [c](std::span<const double> x) {
    return StateView{x}.ego_v() - c.rules.v_flow_min;
  };
  (*table)["slow_leading_vehicle"] = [c, same_lane_margin, in_front_margin,
                                      n_obs](std::span<const double> x) {
    const StateView w{x};
    double best = -kFlagMargin;
    for (int i = 0; i < n_obs; ++i) {
      const double gap = in_front_margin(w, i);
      const double m = std::min({same_lane_margin(w, i), gap, c.rules.d_lead - gap,
                                 c.rules.v_slow - w.obs_v(i)});
      best = std::max(best, m);
    }
    return best;
  };
  (*table)["unnecessary_braking"] = [c, same_lane_margin, in_front_margin,
                                     n_obs](std::span<const double> x) {
    const StateView w{x};
    double justifier = -kFlagMargin;
    for (int i = 0; i < n_obs; ++i) {
      const double gap = in_front_margin(w, i);
      const double m = std::min({same_lane_margin(w, i), gap, c.rules.d_lead - gap,
                                 w.ego_v() - w.obs_v(i)});
      justifier = std::max(justifier, m);
    }
    return std::min(c.rules.a_braking_threshold - w.ego_a(), -justifier);
  };
  preds_ = table;
}

Formula LaneChangeScenario::rule(const std::string& name) const {
  const int t_cut = static_cast<int>(std::lround(cfg_.rules.t_cut / cfg_.dt));
  const int n_obs = static_cast<int>(cfg_.obstacles.size());
  auto sfx = [](int i) { return "_o" + std::to_string(i + 1); };

  if (name == "phi1") {
    std::vector<Formula> per_obstacle;
    for (int i = 0; i < n_obs; ++i) {
      Formula first_cut_in =
          Formula::conj(Formula::pred("cut_in" + sfx(i)),
                        Formula::once(Interval::bounded(1, 1),
                                      Formula::negate(Formula::pred("cut_in" + sfx(i)))));
      Formula recent_cut_in =
          Formula::once(Interval::bounded(0, t_cut), std::move(first_cut_in));
      Formula antecedent = Formula::conj(
          Formula::conj(Formula::pred("in_same_lane" + sfx(i)),
                        Formula::pred("in_front_of" + sfx(i))),
          Formula::negate(std::move(recent_cut_in)));
      per_obstacle.push_back(
          Formula::implies(std::move(antecedent),
                           Formula::pred("keeps_safe_distance_prec" + sfx(i))));
    }
    return Formula::always(Interval::open_ended(0), Formula::conj_all(std::move(per_obstacle)));
  }
  if (name == "phi2") {
    return Formula::always(Interval::open_ended(0),
                           Formula::negate(Formula::pred("unnecessary_braking")));
  }
  if (name == "phi3") {
    return Formula::always(
        Interval::open_ended(0),
        Formula::implies(Formula::negate(Formula::pred("slow_leading_vehicle")),
                         Formula::pred("preserves_flow")));
  }
  if (name == "phi4") {
    std::vector<Formula> per_obstacle;
    for (int i = 0; i < n_obs; ++i) {
      Formula antecedent = Formula::conj(Formula::pred("left_of" + sfx(i)),
                                         Formula::pred("drives_faster" + sfx(i)));
      Formula slow_exception =
          Formula::conj(Formula::pred("in_slow_traffic" + sfx(i)),
                        Formula::pred("slightly_higher_speed" + sfx(i)));
      Formula ramp_exception = Formula::conj(Formula::pred("on_access_ramp"),
                                             Formula::pred("on_main_carriageway" + sfx(i)));
      per_obstacle.push_back(Formula::implies(
          std::move(antecedent),
          Formula::disj(std::move(slow_exception), std::move(ramp_exception))));
    }
    return Formula::always(Interval::open_ended(0), Formula::conj_all(std::move(per_obstacle)));
  }
  throw std::invalid_argument("unknown lane change rule: " + name);
}

// ---------------------------------------------------------------------------
// Simulator
// ---------------------------------------------------------------------------

namespace {

class LaneChangeSimulator : public Simulator {
 public:
  LaneChangeSimulator(const LaneChangeConfig& cfg, ProposalParams proposal)
      : cfg_(cfg), proposal_(proposal), ego_(cfg.ego_initial) {
    lane_target_ = std::clamp(ego_.lane(cfg_.lanes.width), 0, cfg_.lanes.count - 1);
    for (const auto& script : cfg_.obstacles) {
      tracks_.push_back(track_init(script.state_at(0.0, cfg_.lanes)));
    }
  }

  int timestep() const override { return t_; }

  std::vector<double> current_state() const override {
    std::vector<double> x{ego_.s, ego_.d, ego_.psi, ego_.v, a_prev_};
    const double time = t_ * cfg_.dt;
    for (const auto& script : cfg_.obstacles) {
      const VehicleState o = script.state_at(time, cfg_.lanes);
      x.push_back(o.s);
      x.push_back(o.d);
      x.push_back(o.psi);
      x.push_back(o.v);
    }
    return x;
  }

  StepResult step(NoiseStream& stream) override {
    const double time = t_ * cfg_.dt;
    std::vector<VehicleState> obstacles;
    for (const auto& script : cfg_.obstacles) {
      obstacles.push_back(script.state_at(time, cfg_.lanes));
    }
    StepResult result;
    const auto observations =
        pem_observe(ego_, obstacles, cfg_.pem, stream, &proposal_, &result.log_weight,
                    &result.noise);
    for (size_t i = 0; i < observations.size(); ++i) {
      if (!observations[i].detected) continue;
      const double range = std::hypot(observations[i].s - ego_.s,
                                      observations[i].d - ego_.d);
      track_update(tracks_[i], observations[i], cfg_.pem.sigmas(range));
    }
    const Action a = controller_plan(ego_, a_prev_, lane_target_, tracks_,
                                     cfg_.controller, cfg_.lanes, cfg_.dt,
                                     &lane_target_);
    ego_ = dyn_step(ego_, a, cfg_.dt, cfg_.wheelbase);
    a_prev_ = a.accel;
    for (auto& trk : tracks_) track_predict(trk, cfg_.dt, cfg_.track_process_noise);
    ++t_;
    result.action = {a.accel, a.turn_rate};
    return result;
  }

  SimulatorSnapshot snapshot() const override {
    SimulatorSnapshot snap;
    snap.timestep = t_;
    auto& b = snap.blob;
    b = {static_cast<double>(t_), ego_.s,  ego_.d,
         ego_.psi,                 ego_.v,  a_prev_,
         static_cast<double>(lane_target_)};
    for (const auto& trk : tracks_) {
      b.insert(b.end(), trk.mean.begin(), trk.mean.end());
      b.insert(b.end(), trk.cov.begin(), trk.cov.end());
      b.push_back(trk.psi);
      b.push_back(static_cast<double>(trk.staleness));
    }
    snap.state = current_state();
    return snap;
  }

  void restore(const SimulatorSnapshot& snap) override {
    const size_t expected = 7 + cfg_.obstacles.size() * 22;
    if (snap.blob.size() != expected) {
      throw std::runtime_error("lane change snapshot malformed");
    }
    const auto& b = snap.blob;
    t_ = static_cast<int>(b[0]);
    ego_.s = b[1];
    ego_.d = b[2];
    ego_.psi = b[3];
    ego_.v = b[4];
    a_prev_ = b[5];
    lane_target_ = static_cast<int>(b[6]);
    size_t off = 7;
    for (auto& trk : tracks_) {
      std::copy_n(b.begin() + static_cast<long>(off), 4, trk.mean.begin());
      std::copy_n(b.begin() + static_cast<long>(off) + 4, 16, trk.cov.begin());
      trk.psi = b[off + 20];
      trk.staleness = static_cast<int>(b[off + 21]);
      off += 22;
    }
  }

 private:
  LaneChangeConfig cfg_;
  ProposalParams proposal_;
  VehicleState ego_;
  double a_prev_ = 0.0;
  int lane_target_ = 0;
  std::vector<TrackEstimate> tracks_;
  int t_ = 0;
};

}  // namespace

std::unique_ptr<Simulator> LaneChangeScenario::make_simulator(
    const ProposalParams* proposal) const {
  return std::make_unique<LaneChangeSimulator>(cfg_,
                                               proposal ? *proposal : ProposalParams{});
}

ProposalParams LaneChangeScenario::fit_proposal(
    const std::vector<const TrajectoryRun*>& elites,
    const std::vector<double>& weights) const {
  // Noise records hold [p_detect_target, detected, z_s, z_d, z_psi] per
  // obstacle. Offsets are fit on detected entries only (the ones that shaped
  // the trajectory); detection is fit as a logit shift matching the weighted
  // observed rate against the weighted target rate.
  double wsum = 0.0, det_sum = 0.0, p_sum = 0.0;
  std::array<double, 3> mean{};
  for (size_t e = 0; e < elites.size(); ++e) {
    const double w = weights[e];
    for (const auto& rec : elites[e]->noise_log) {
      for (size_t off = 0; off + 5 <= rec.size(); off += 5) {
        p_sum += w * rec[off];
        det_sum += w * rec[off + 1];
        if (rec[off + 1] > 0.5) {
          wsum += w;
          for (int k = 0; k < 3; ++k) {
            mean[static_cast<size_t>(k)] += w * rec[off + 2 + static_cast<size_t>(k)];
          }
        }
      }
    }
  }
  if (wsum <= 0.0) {
    ProposalParams degenerate;
    degenerate.noise_sigma_scale = 0.0;  // signals an unusable elite set
    return degenerate;
  }
  for (double& m : mean) m /= wsum;
  double var = 0.0;
  double count_sum = 0.0;
  for (size_t e = 0; e < elites.size(); ++e) {
    const double w = weights[e];
    for (const auto& rec : elites[e]->noise_log) {
      for (size_t off = 0; off + 5 <= rec.size(); off += 5) {
        if (rec[off + 1] > 0.5) {
          for (int k = 0; k < 3; ++k) {
            const double d =
                rec[off + 2 + static_cast<size_t>(k)] - mean[static_cast<size_t>(k)];
            var += w * d * d;
          }
          count_sum += 3.0 * w;
        }
      }
    }
  }
  ProposalParams fit;
  fit.noise_mean_shift = mean;
  fit.noise_sigma_scale = count_sum > 0.0 ? std::sqrt(var / count_sum) : 0.0;
  double total = 0.0;
  for (size_t e = 0; e < elites.size(); ++e) {
    for (const auto& rec : elites[e]->noise_log) {
      total += weights[e] * static_cast<double>(rec.size() / 5);
    }
  }
  if (total > 0.0) {
    const double rate = clamp(det_sum / total, 1e-4, 1.0 - 1e-4);
    const double target = clamp(p_sum / total, 1e-4, 1.0 - 1e-4);
    fit.detect_logit_shift = std::log(rate / (1.0 - rate)) -
                             std::log(target / (1.0 - target));
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

LaneChangeConfig LaneChangeConfig::defaults() {
  LaneChangeConfig cfg;
  cfg.ego_initial = {15.0, cfg.lanes.centre(1), 0.0, 20.0, 4.5, 2.0};

  ObstacleScript blocker;  // static obstacle in the ego's lane
  blocker.initial = {55.0, cfg.lanes.centre(1), 0.0, 0.0, 4.5, 2.0};
  blocker.start_lane = 1;
  blocker.target_lane = 1;

  ObstacleScript cutter;  // slow centre-lane vehicle cutting into the left lane
  cutter.initial = {65.0, cfg.lanes.centre(1), 0.0, 5.0, 4.5, 2.0};
  cutter.start_lane = 1;
  cutter.target_lane = 2;
  cutter.maneuver_start = 0.6;

  ObstacleScript merger;  // right-lane vehicle merging into the centre
  merger.initial = {65.0, cfg.lanes.centre(0), 0.0, 12.0, 4.5, 2.0};
  merger.start_lane = 0;
  merger.target_lane = 1;
  merger.maneuver_start = 1.0;

  cfg.obstacles = {blocker, cutter, merger};
  return cfg;
}

namespace {

using nlohmann::json;

json vehicle_to_json(const VehicleState& v) {
  return {{"s", v.s},     {"d", v.d},           {"psi", v.psi},
          {"v", v.v},     {"length", v.length}, {"width", v.width}};
}

VehicleState vehicle_from_json(const json& j, VehicleState base) {
  base.s = j.value("s", base.s);
  base.d = j.value("d", base.d);
  base.psi = j.value("psi", base.psi);
  base.v = j.value("v", base.v);
  base.length = j.value("length", base.length);
  base.width = j.value("width", base.width);
  return base;
}

}  // namespace

std::string LaneChangeConfig::to_json() const {
  json j;
  j["lanes"] = {{"count", lanes.count}, {"width", lanes.width}};
  j["dt"] = dt;
  j["horizon"] = horizon;
  j["wheelbase"] = wheelbase;
  j["ego"] = vehicle_to_json(ego_initial);
  j["obstacles"] = json::array();
  for (const auto& o : obstacles) {
    j["obstacles"].push_back({{"initial", vehicle_to_json(o.initial)},
                              {"start_lane", o.start_lane},
                              {"target_lane", o.target_lane},
                              {"maneuver_start", o.maneuver_start},
                              {"maneuver_duration", o.maneuver_duration}});
  }
  j["pem"] = {{"detect_intercept", pem.detect_intercept},
              {"detect_range_coeff", pem.detect_range_coeff},
              {"detect_occlusion_coeff", pem.detect_occlusion_coeff},
              {"noise_base", pem.noise_base},
              {"noise_range_slope", pem.noise_range_slope}};
  j["controller"] = {{"horizon", controller.horizon},
                     {"v_ref", controller.v_ref},
                     {"w_velocity", controller.w_velocity},
                     {"w_accel", controller.w_accel},
                     {"w_turn", controller.w_turn},
                     {"w_jerk", controller.w_jerk},
                     {"w_heading", controller.w_heading},
                     {"w_lane_centre", controller.w_lane_centre},
                     {"w_obstacle", controller.w_obstacle},
                     {"w_progress", controller.w_progress},
                     {"accel_candidates", controller.accel_candidates},
                     {"lane_targets", controller.lane_targets},
                     {"a_min", controller.a_min},
                     {"a_max", controller.a_max},
                     {"steer_gain", controller.steer_gain},
                     {"heading_gain", controller.heading_gain},
                     {"max_heading", controller.max_heading},
                     {"max_turn_rate", controller.max_turn_rate},
                     {"collision_margin", controller.collision_margin},
                     {"potential_scale", controller.potential_scale},
                     {"lateral_decay", controller.lateral_decay},
                     {"headway_time", controller.headway_time},
                     {"accel_refine", controller.accel_refine},
                     {"w_switch", controller.w_switch}};
  j["rules"] = {{"t_react", rules.t_react},
                {"a_min_brake", rules.a_min_brake},
                {"t_cut", rules.t_cut},
                {"a_braking_threshold", rules.a_braking_threshold},
                {"d_lead", rules.d_lead},
                {"v_slow", rules.v_slow},
                {"v_flow_min", rules.v_flow_min},
                {"dv_max", rules.dv_max},
                {"v_queue", rules.v_queue},
                {"d_near", rules.d_near}};
  j["track_process_noise"] = track_process_noise;
  return j.dump(2) + "\n";
}

LaneChangeConfig LaneChangeConfig::from_json(const std::string& text) {
  LaneChangeConfig cfg = defaults();
  const json j = json::parse(text);
  if (j.contains("lanes")) {
    cfg.lanes.count = j["lanes"].value("count", cfg.lanes.count);
    cfg.lanes.width = j["lanes"].value("width", cfg.lanes.width);
  }
  cfg.dt = j.value("dt", cfg.dt);
  cfg.horizon = j.value("horizon", cfg.horizon);
  cfg.wheelbase = j.value("wheelbase", cfg.wheelbase);
  if (j.contains("ego")) cfg.ego_initial = vehicle_from_json(j["ego"], cfg.ego_initial);
  if (j.contains("obstacles")) {
    std::vector<ObstacleScript> scripts;
    for (const auto& jo : j["obstacles"]) {
      ObstacleScript o;
      if (jo.contains("initial")) o.initial = vehicle_from_json(jo["initial"], o.initial);
      o.start_lane = jo.value("start_lane", o.start_lane);
      o.target_lane = jo.value("target_lane", o.target_lane);
      o.maneuver_start = jo.value("maneuver_start", o.maneuver_start);
      o.maneuver_duration = jo.value("maneuver_duration", o.maneuver_duration);
      scripts.push_back(o);
    }
    cfg.obstacles = scripts;
  }
  if (j.contains("pem")) {
    const auto& p = j["pem"];
    cfg.pem.detect_intercept = p.value("detect_intercept", cfg.pem.detect_intercept);
    cfg.pem.detect_range_coeff = p.value("detect_range_coeff", cfg.pem.detect_range_coeff);
    cfg.pem.detect_occlusion_coeff =
        p.value("detect_occlusion_coeff", cfg.pem.detect_occlusion_coeff);
    cfg.pem.noise_base = p.value("noise_base", cfg.pem.noise_base);
    cfg.pem.noise_range_slope = p.value("noise_range_slope", cfg.pem.noise_range_slope);
  }
  if (j.contains("controller")) {
    const auto& p = j["controller"];
    auto& c = cfg.controller;
    c.horizon = p.value("horizon", c.horizon);
    c.v_ref = p.value("v_ref", c.v_ref);
    c.w_velocity = p.value("w_velocity", c.w_velocity);
    c.w_accel = p.value("w_accel", c.w_accel);
    c.w_turn = p.value("w_turn", c.w_turn);
    c.w_jerk = p.value("w_jerk", c.w_jerk);
    c.w_heading = p.value("w_heading", c.w_heading);
    c.w_lane_centre = p.value("w_lane_centre", c.w_lane_centre);
    c.w_obstacle = p.value("w_obstacle", c.w_obstacle);
    c.w_progress = p.value("w_progress", c.w_progress);
    c.accel_candidates = p.value("accel_candidates", c.accel_candidates);
    c.lane_targets = p.value("lane_targets", c.lane_targets);
    c.a_min = p.value("a_min", c.a_min);
    c.a_max = p.value("a_max", c.a_max);
    c.steer_gain = p.value("steer_gain", c.steer_gain);
    c.heading_gain = p.value("heading_gain", c.heading_gain);
    c.max_heading = p.value("max_heading", c.max_heading);
    c.max_turn_rate = p.value("max_turn_rate", c.max_turn_rate);
    c.collision_margin = p.value("collision_margin", c.collision_margin);
    c.potential_scale = p.value("potential_scale", c.potential_scale);
    c.lateral_decay = p.value("lateral_decay", c.lateral_decay);
    c.headway_time = p.value("headway_time", c.headway_time);
    c.accel_refine = p.value("accel_refine", c.accel_refine);
    c.w_switch = p.value("w_switch", c.w_switch);
  }
  if (j.contains("rules")) {
    const auto& p = j["rules"];
    auto& r = cfg.rules;
    r.t_react = p.value("t_react", r.t_react);
    r.a_min_brake = p.value("a_min_brake", r.a_min_brake);
    r.t_cut = p.value("t_cut", r.t_cut);
    r.a_braking_threshold = p.value("a_braking_threshold", r.a_braking_threshold);
    r.d_lead = p.value("d_lead", r.d_lead);
    r.v_slow = p.value("v_slow", r.v_slow);
    r.v_flow_min = p.value("v_flow_min", r.v_flow_min);
    r.dv_max = p.value("dv_max", r.dv_max);
    r.v_queue = p.value("v_queue", r.v_queue);
    r.d_near = p.value("d_near", r.d_near);
  }
  cfg.track_process_noise = j.value("track_process_noise", cfg.track_process_noise);
  return cfg;
}

}  // namespace stlsplit
