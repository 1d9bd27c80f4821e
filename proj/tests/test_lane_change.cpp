#include <cmath>
#include <vector>

#include <doctest.h>

#include "helpers.hpp"
#include "stlsplit/lane_change.hpp"
#include "stlsplit/runner.hpp"

using namespace stlsplit;
using namespace stlsplit::testing;

namespace {

/// Combined-state builder: ego (s, d, psi, v, a_prev) then per-obstacle
/// (s, d, psi, v) triples.
std::vector<double> make_state(std::vector<double> ego,
                               std::vector<std::vector<double>> obstacles) {
  std::vector<double> x = std::move(ego);
  for (auto& o : obstacles) x.insert(x.end(), o.begin(), o.end());
  return x;
}

TrackEstimate far_track(double d) {
  VehicleState v;
  v.s = 1000.0;
  v.d = d;
  return track_init(v);
}

LaneChangeConfig quiet_config() {
  // Perception made deterministic: certain detection, zero observation noise.
  LaneChangeConfig cfg = LaneChangeConfig::defaults();
  cfg.pem.detect_intercept = 50.0;
  cfg.pem.noise_base = {0.0, 0.0, 0.0};
  cfg.pem.noise_range_slope = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("single-track dynamics integrate straight lines exactly") {
  VehicleState x;
  x.s = 15.0;
  x.v = 20.0;
  const VehicleState one = dyn_step(x, {0.0, 0.0}, 0.1);
  CHECK(one.s == doctest::Approx(17.0));
  CHECK(one.d == x.d);
  CHECK(one.v == 20.0);

  const VehicleState accel = dyn_step(x, {1.0, 0.0}, 0.1);
  CHECK(accel.v == doctest::Approx(20.1));

  VehicleState cruise = x;
  for (int t = 0; t < 40; ++t) cruise = dyn_step(cruise, {0.0, 0.0}, 0.1);
  CHECK(cruise.s == doctest::Approx(95.0));
}

TEST_CASE("dynamics clamp speed at zero and turn through the wheelbase") {
  VehicleState x;
  x.v = 0.5;
  const VehicleState stopped = dyn_step(x, {-10.0, 0.0}, 0.1);
  CHECK(stopped.v == 0.0);

  VehicleState moving;
  moving.v = 20.0;
  const VehicleState turned = dyn_step(moving, {0.0, 0.2}, 0.1);
  CHECK(turned.psi == doctest::Approx(0.02));  // psi' = psi + omega*dt
}

TEST_CASE("perception reduces to ground truth when noise is degenerate") {
  VehicleState ego;
  ego.s = 15.0;
  ego.d = 5.25;
  VehicleState obs;
  obs.s = 40.0;
  obs.d = 5.25;
  obs.psi = 0.1;

  PemParams certain;
  certain.detect_intercept = 60.0;  // detection probability ~1 at any range
  certain.noise_base = {0.0, 0.0, 0.0};
  certain.noise_range_slope = 0.0;
  NoiseStream stream(1, 0);
  const auto seen = pem_observe(ego, {obs}, certain, stream, nullptr, nullptr, nullptr);
  REQUIRE(seen.size() == 1);
  CHECK(seen[0].detected);
  CHECK(seen[0].s == obs.s);
  CHECK(seen[0].d == obs.d);
  CHECK(seen[0].psi == obs.psi);

  PemParams blind;
  blind.detect_intercept = -60.0;
  NoiseStream stream2(1, 1);
  for (int rep = 0; rep < 50; ++rep) {
    const auto unseen =
        pem_observe(ego, {obs}, blind, stream2, nullptr, nullptr, nullptr);
    CHECK(!unseen[0].detected);
  }
}

TEST_CASE("an obstacle directly behind another is flagged occluded") {
  VehicleState ego;
  ego.d = 5.25;
  VehicleState near;
  near.s = 30.0;
  near.d = 5.25;
  VehicleState far;
  far.s = 60.0;
  far.d = 5.25;  // same bearing, greater range
  VehicleState aside;
  aside.s = 30.0;
  aside.d = 12.0;  // clearly off-axis

  const auto feats = pem_features(ego, {near, far, aside});
  CHECK(!feats[0].occluded);
  CHECK(feats[1].occluded);
  CHECK(!feats[2].occluded);
}

TEST_CASE("degenerate kalman update recovers exact observations") {
  VehicleState truth;
  truth.s = 42.0;
  truth.d = 5.0;
  truth.v = 3.0;
  VehicleState prior;
  prior.s = 40.0;
  prior.d = 4.0;
  TrackEstimate est = track_init(prior);
  Observation obs;
  obs.detected = true;
  obs.s = truth.s;
  obs.d = truth.d;
  obs.psi = 0.05;
  track_update(est, obs, {1e-9, 1e-9, 1e-9});
  CHECK(est.mean[0] == doctest::Approx(truth.s));
  CHECK(est.mean[1] == doctest::Approx(truth.d));
  CHECK(est.psi == 0.05);
  CHECK(est.staleness == 0);
}

TEST_CASE("an unobserved track follows constant-velocity extrapolation") {
  VehicleState prior;
  prior.s = 10.0;
  prior.v = 5.0;
  TrackEstimate est = track_init(prior);
  for (int t = 0; t < 10; ++t) track_predict(est, 0.1, 0.0);
  CHECK(est.mean[0] == doctest::Approx(15.0));
  CHECK(est.staleness == 10);
}

TEST_CASE("forecast is the identity at zero and composes additively") {
  VehicleState prior;
  prior.s = 20.0;
  prior.v = 5.0;
  const TrackEstimate est = track_init(prior);
  CHECK(track_forecast(est, 0, 0.1)[0] == est.mean[0]);
  CHECK(track_forecast(est, 10, 0.1)[0] == doctest::Approx(25.0));

  TrackEstimate mid = est;
  const auto at3 = track_forecast(est, 3, 0.1);
  mid.mean = at3;
  for (int total = 0; total <= 8; ++total) {
    CHECK(track_forecast(est, 3 + total, 0.1)[0] ==
          doctest::Approx(track_forecast(mid, total, 0.1)[0]));
  }
}

TEST_CASE("kalman posterior is calibrated on a stationary obstacle") {
  VehicleState truth;
  truth.s = 50.0;
  truth.d = 5.25;
  const double sigma = 0.5;
  int covered = 0;
  const int runs = 1000;
  for (int r = 0; r < runs; ++r) {
    NoiseStream stream(9000, static_cast<uint64_t>(r));
    TrackEstimate est = track_init(truth);  // prior mean at truth, unit variance
    for (int t = 0; t < 40; ++t) {
      track_predict(est, 0.1, 0.0);
      Observation obs;
      obs.detected = true;
      obs.s = truth.s + sigma * stream.normal();
      obs.d = truth.d + sigma * stream.normal();
      track_update(est, obs, {sigma, sigma, 0.01});
    }
    const double sd_s = std::sqrt(est.cov[0]);
    const double sd_d = std::sqrt(est.cov[5]);
    if (std::abs(est.mean[0] - truth.s) < 3.0 * sd_s &&
        std::abs(est.mean[1] - truth.d) < 3.0 * sd_d) {
      ++covered;
    }
  }
  CHECK(covered >= 990);
}

TEST_CASE("controller accelerates on an empty road below the reference speed") {
  LaneLayout lanes;
  VehicleState ego;
  ego.s = 15.0;
  ego.d = lanes.centre(1);
  ego.v = 20.0;
  ControllerConfig cfg;
  const std::vector<TrackEstimate> tracks{far_track(lanes.centre(0)),
                                          far_track(lanes.centre(1)),
                                          far_track(lanes.centre(2))};
  const Action a = controller_plan(ego, 0.0, 1, tracks, cfg, lanes, 0.1);
  CHECK(a.accel > 0.0);
  CHECK(std::abs(a.turn_rate) < 1e-9);
}

TEST_CASE("controller changes lane around a blocking obstacle") {
  LaneLayout lanes;
  VehicleState ego;
  ego.s = 15.0;
  ego.d = lanes.centre(1);
  ego.v = 20.0;
  ControllerConfig cfg;

  VehicleState blocker;
  blocker.s = 40.0;  // inside the stopping distance at 20 m/s
  blocker.d = lanes.centre(1);
  std::vector<TrackEstimate> tracks{far_track(lanes.centre(0)), track_init(blocker),
                                    far_track(lanes.centre(2))};

  double a_prev = 0.0;
  int target = 1;
  for (int t = 0; t < 20; ++t) {
    const Action a = controller_plan(ego, a_prev, target, tracks, cfg, lanes, 0.1, &target);
    ego = dyn_step(ego, a, 0.1);
    a_prev = a.accel;
  }
  CHECK(ego.lane(lanes.width) != 1);
}

TEST_CASE("controller falls back to maximum braking when boxed in") {
  LaneLayout lanes;
  VehicleState ego;
  ego.s = 15.0;
  ego.d = lanes.centre(1);
  ego.v = 20.0;
  ControllerConfig cfg;
  // A stationary wall across all three lanes just ahead.
  std::vector<TrackEstimate> walls;
  for (int lane = 0; lane < 3; ++lane) {
    VehicleState w;
    w.s = 19.0;
    w.d = lanes.centre(lane);
    walls.push_back(track_init(w));
  }
  const Action a = controller_plan(ego, 0.0, 1, walls, cfg, lanes, 0.1);
  CHECK(a.accel == cfg.a_min);
  CHECK(a.turn_rate == 0.0);
}

TEST_CASE("rule formulas have the documented shapes") {
  LaneChangeScenario scenario;
  const Formula phi3 = scenario.rule("phi3");
  const Formula expected = Formula::always(
      Interval::open_ended(0),
      Formula::implies(Formula::negate(Formula::pred("slow_leading_vehicle")),
                       Formula::pred("preserves_flow")));
  CHECK(phi3.structurally_equal(expected));

  const Formula phi1 = scenario.rule("phi1");
  CHECK(phi1.node(phi1.root()).kind == NodeKind::Always);
  const auto names = phi1.predicate_names();
  CHECK(std::find(names.begin(), names.end(), "cut_in_o2") != names.end());
  CHECK(std::find(names.begin(), names.end(), "keeps_safe_distance_prec_o3") !=
        names.end());

  const Formula phi4 = scenario.rule("phi4");
  const auto names4 = phi4.predicate_names();
  CHECK(std::find(names4.begin(), names4.end(), "on_access_ramp") != names4.end());
  CHECK_THROWS_AS(scenario.rule("phi5"), std::invalid_argument);
}

TEST_CASE("predicate margins match hand-computed scenes") {
  LaneChangeScenario scenario;
  const auto preds = scenario.predicates();

  // Ego at s=0, v=20; leader (obstacle 1) at s=50, v=5, same lane.
  const auto state = make_state({0.0, 5.25, 0.0, 20.0, 0.0},
                                {{50.0, 5.25, 0.0, 5.0},
                                 {1000.0, 8.75, 0.0, 5.0},
                                 {1000.0, 1.75, 0.0, 10.0}});
  // d_safe = 20*0.3 + (400-25)/(2*10) = 24.75; gap = 45.5.
  CHECK(preds->at("keeps_safe_distance_prec_o1")(state) == doctest::Approx(45.5 - 24.75));
  CHECK(preds->at("in_front_of_o1")(state) == doctest::Approx(45.5));
  CHECK(preds->at("in_same_lane_o1")(state) == doctest::Approx(1.75));
  CHECK(preds->at("in_same_lane_o2")(state) < 0.0);
  // "Left of" needs longitudinal overlap: alongside vehicles test the lane
  // offset, distant ones are gated by the footprint-overlap term.
  const auto alongside = make_state({0.0, 5.25, 0.0, 20.0, 0.0},
                                    {{50.0, 5.25, 0.0, 5.0},
                                     {1.0, 8.75, 0.0, 5.0},
                                     {1.0, 1.75, 0.0, 10.0}});
  CHECK(preds->at("left_of_o2")(alongside) == doctest::Approx(0.5));
  CHECK(preds->at("left_of_o3")(alongside) == doctest::Approx(-1.5));
  CHECK(preds->at("left_of_o2")(state) == doctest::Approx(4.5 - 1000.0));
  CHECK(preds->at("drives_faster_o1")(state) == doctest::Approx(15.0));
  CHECK(preds->at("slightly_higher_speed_o1")(state) == doctest::Approx(5.5 - 15.0));
  CHECK(preds->at("on_access_ramp")(state) < 0.0);
  CHECK(preds->at("on_main_carriageway_o1")(state) > 0.0);

  // preserves_flow crosses zero exactly at the flow minimum.
  auto flow_state = state;
  flow_state[3] = scenario.config().rules.v_flow_min;
  CHECK(preds->at("preserves_flow")(flow_state) == doctest::Approx(0.0));

  // A leader 35.5 m ahead with v=5 is slow and within the lead distance; the
  // default 45 m leader above is just outside it.
  const auto near_leader = make_state({0.0, 5.25, 0.0, 20.0, 0.0},
                                      {{40.0, 5.25, 0.0, 5.0},
                                       {1000.0, 8.75, 0.0, 5.0},
                                       {1000.0, 1.75, 0.0, 10.0}});
  CHECK(preds->at("slow_leading_vehicle")(near_leader) > 0.0);
  CHECK(preds->at("slow_leading_vehicle")(state) < 0.0);
  auto empty_road = make_state({0.0, 5.25, 0.0, 20.0, 0.0},
                               {{1000.0, 5.25, 0.0, 5.0},
                                {1000.0, 8.75, 0.0, 5.0},
                                {1000.0, 1.75, 0.0, 10.0}});
  CHECK(preds->at("slow_leading_vehicle")(empty_road) < 0.0);

  // Hard braking with nothing ahead is unnecessary; justified with a slow
  // leader close by.
  auto braking = empty_road;
  braking[4] = -4.0;
  CHECK(preds->at("unnecessary_braking")(braking) > 0.0);
  auto braking_justified = near_leader;
  braking_justified[4] = -4.0;
  CHECK(preds->at("unnecessary_braking")(braking_justified) < 0.0);

  // Obstacle 2 halfway into the ego's lane from the left, ahead of the ego.
  auto cutting = make_state({0.0, 5.25, 0.0, 20.0, 0.0},
                            {{1000.0, 5.25, 0.0, 5.0},
                             {30.0, 7.0, 0.0, 5.0},
                             {1000.0, 1.75, 0.0, 10.0}});
  CHECK(preds->at("cut_in_o2")(cutting) > 0.0);
  auto outside = cutting;
  outside[kEgoFields + kObstacleFields + 1] = 8.75;  // back at the left lane centre
  CHECK(preds->at("cut_in_o2")(outside) < 0.0);
}

TEST_CASE("scenario trajectories have exactly 41 states") {
  LaneChangeScenario scenario;
  for (uint64_t seed : {3ULL, 77ULL}) {
    auto sim = scenario.make_simulator(nullptr);
    const auto run = run_trajectory(scenario, *sim, scenario.horizon(),
                                    NoiseStream(seed, 0), scenario.rule("phi1"));
    CHECK(run.traj.states.size() == 41);
    CHECK(run.levels.size() == 41);
    CHECK(run.traj.dt == doctest::Approx(0.1));
  }
}

TEST_CASE("noise-free closed loop is seed-independent and collision-free") {
  LaneChangeScenario scenario(quiet_config());
  const Formula phi1 = scenario.rule("phi1");

  auto sim_a = scenario.make_simulator(nullptr);
  auto sim_b = scenario.make_simulator(nullptr);
  const auto run_a =
      run_trajectory(scenario, *sim_a, scenario.horizon(), NoiseStream(1, 0), phi1);
  const auto run_b =
      run_trajectory(scenario, *sim_b, scenario.horizon(), NoiseStream(999, 5), phi1);
  CHECK(run_a.traj.states == run_b.traj.states);
  CHECK(run_a.levels == run_b.levels);

  const auto& cfg = scenario.config();
  for (size_t t = 0; t < run_a.traj.states.size(); ++t) {
    const auto& x = run_a.traj.states[t];
    for (int i = 0; i < 3; ++i) {
      const double ds = std::abs(x[static_cast<size_t>(kEgoFields + kObstacleFields * i)] - x[0]);
      const double dd =
          std::abs(x[static_cast<size_t>(kEgoFields + kObstacleFields * i + 1)] - x[1]);
      const bool overlap = ds < 4.5 && dd < 2.0;  // summed half-extents
      CHECK(!overlap);
    }
    // Ego stays on the road.
    CHECK(x[1] > cfg.lanes.road_min());
    CHECK(x[1] < cfg.lanes.road_max());
  }

  // All four rules evaluate on the noise-free run without error.
  for (const auto& name : scenario.rule_names()) {
    auto sim = scenario.make_simulator(nullptr);
    const auto run = run_trajectory(scenario, *sim, scenario.horizon(),
                                    NoiseStream(1, 0), scenario.rule(name));
    CHECK(std::isfinite(run.final_level()));
  }
}

TEST_CASE("simulation is bitwise deterministic for a fixed seed") {
  LaneChangeScenario scenario;
  const Formula phi2 = scenario.rule("phi2");
  auto sim_a = scenario.make_simulator(nullptr);
  auto sim_b = scenario.make_simulator(nullptr);
  const auto a =
      run_trajectory(scenario, *sim_a, scenario.horizon(), NoiseStream(42, 7), phi2);
  const auto b =
      run_trajectory(scenario, *sim_b, scenario.horizon(), NoiseStream(42, 7), phi2);
  CHECK(a.traj.states == b.traj.states);
  CHECK(a.levels == b.levels);
  CHECK(a.log_weight == b.log_weight);
}

TEST_CASE("snapshots splice mid-trajectory with bitwise prefixes") {
  LaneChangeScenario scenario;
  const Formula phi1 = scenario.rule("phi1");
  auto sim = scenario.make_simulator(nullptr);
  const auto source =
      run_trajectory(scenario, *sim, scenario.horizon(), NoiseStream(5, 0), phi1);

  auto sim2 = scenario.make_simulator(nullptr);
  const auto spliced = resume_trajectory(scenario, source, 17, *sim2, scenario.horizon(),
                                         NoiseStream(5, 1), phi1);
  for (int t = 0; t <= 17; ++t) {
    CHECK(spliced.traj.states[static_cast<size_t>(t)] ==
          source.traj.states[static_cast<size_t>(t)]);
    CHECK(spliced.levels[static_cast<size_t>(t)] == source.levels[static_cast<size_t>(t)]);
  }
  CHECK(spliced.traj.states.size() == 41);
  CHECK(spliced.steps_simulated == 40 - 17);
}

TEST_CASE("config round-trips through json and accepts overrides") {
  const LaneChangeConfig cfg = LaneChangeConfig::defaults();
  const LaneChangeConfig back = LaneChangeConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
  CHECK(back.ego_initial.s == 15.0);
  CHECK(back.ego_initial.v == 20.0);
  CHECK(back.obstacles[0].initial.s == 55.0);
  CHECK(back.obstacles[1].initial.v == 5.0);
  CHECK(back.obstacles[1].maneuver_start == doctest::Approx(0.6));
  CHECK(back.obstacles[2].initial.v == 12.0);
  CHECK(back.obstacles[2].maneuver_start == doctest::Approx(1.0));

  const LaneChangeConfig tweaked =
      LaneChangeConfig::from_json(R"({"rules": {"t_cut": 2.0}, "dt": 0.05})");
  CHECK(tweaked.rules.t_cut == 2.0);
  CHECK(tweaked.dt == 0.05);
  CHECK(tweaked.ego_initial.v == 20.0);  // untouched fields keep defaults
}

TEST_CASE("scripted obstacles ramp laterally at the scheduled time") {
  const LaneChangeConfig cfg = LaneChangeConfig::defaults();
  const auto& cutter = cfg.obstacles[1];
  CHECK(cutter.state_at(0.0, cfg.lanes).d == doctest::Approx(cfg.lanes.centre(1)));
  CHECK(cutter.state_at(0.6, cfg.lanes).d == doctest::Approx(cfg.lanes.centre(1)));
  CHECK(cutter.state_at(1.1, cfg.lanes).d ==
        doctest::Approx(cfg.lanes.centre(1) + 0.5 * cfg.lanes.width));
  CHECK(cutter.state_at(2.0, cfg.lanes).d == doctest::Approx(cfg.lanes.centre(2)));
  CHECK(cutter.state_at(2.0, cfg.lanes).s == doctest::Approx(65.0 + 5.0 * 2.0));
}
