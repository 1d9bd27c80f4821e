#include <cmath>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "fixtures.hpp"
#include "helpers.hpp"
#include "scripted_scenario.hpp"
#include "stlsplit/estimators.hpp"
#include "stlsplit/lane_change.hpp"
#include "stlsplit/toy_walk.hpp"

using namespace stlsplit;
using namespace stlsplit::testing;

namespace {

ToyWalkScenario easy_walk() {
  ToyWalkConfig cfg;
  cfg.barrier = fixtures::kHalfBarrier;
  return ToyWalkScenario(cfg);
}

ToyWalkScenario rare_walk() { return ToyWalkScenario(ToyWalkConfig{}); }

}  // namespace

TEST_CASE("monte carlo matches the brute-force reference") {
  auto scenario = easy_walk();
  const Formula rule = scenario.rule("barrier");
  const int N = 20000;
  const Estimate est = mc_estimate(scenario, rule, N, 7);

  const double se = std::sqrt(fixtures::kHalfP * (1.0 - fixtures::kHalfP) / N);
  CHECK(std::abs(est.p_hat - fixtures::kHalfP) < 4.0 * se);
  CHECK(est.method == "mc");
  CHECK(est.trajectories_run == N);
  CHECK(est.total_simulation_steps == static_cast<long>(N) * scenario.horizon());
  CHECK(est.levels.empty());
  CHECK(!est.extinction);
  CHECK(est.std_error == doctest::Approx(std::sqrt(est.p_hat * (1 - est.p_hat) / N)));
}

TEST_CASE("monte carlo is invariant to the worker count") {
  auto scenario = easy_walk();
  const Formula rule = scenario.rule("barrier");
  EstimatorOptions serial, parallel;
  parallel.workers = 4;
  const Estimate a = mc_estimate(scenario, rule, 500, 99, serial);
  const Estimate b = mc_estimate(scenario, rule, 500, 99, parallel);
  CHECK(a.p_hat == b.p_hat);
  CHECK(a.total_simulation_steps == b.total_simulation_steps);
}

TEST_CASE("deterministic walks give probability exactly zero or one") {
  ToyWalkConfig cfg;
  cfg.sigma = 0.0;
  cfg.drift = 1.0;
  cfg.horizon = 10;

  cfg.barrier = 5.0;  // x_t = t crosses 5, final robustness -5
  ToyWalkScenario failing(cfg);
  CHECK(mc_estimate(failing, failing.rule("barrier"), 16, 1).p_hat == 1.0);
  const Estimate ams_fail = ams_estimate(failing, failing.rule("barrier"), 16, 2, 1);
  CHECK(ams_fail.p_hat == 1.0);
  CHECK(ams_fail.levels.empty());  // first adaptive level already below zero
  CHECK(!ams_fail.extinction);

  cfg.barrier = 20.0;  // never crossed, all robustness ties at +10
  ToyWalkScenario safe(cfg);
  CHECK(mc_estimate(safe, safe.rule("barrier"), 16, 1).p_hat == 0.0);
  const Estimate ams_safe = ams_estimate(safe, safe.rule("barrier"), 16, 2, 1);
  CHECK(ams_safe.extinction);  // every trajectory ties: nothing survives a cut
  CHECK(ams_safe.p_hat == 0.0);
}

TEST_CASE("splitting product reproduces hand arithmetic on scripted levels") {
  // Four scripted outcomes {-0.5, 0, 1, 2}, N = 4, K = 1. Stage one discards
  // the level-2 trajectory (factor 3/4). When its clone copies a sub-unit
  // survivor, stage two discards the level-1 trajectory (factor 3/4) and the
  // run then stops with two of four final levels negative, giving
  // (3/4)(3/4)(2/4) = 9/32.
  ScriptedScenario scenario({-0.5, 0.0, 1.0, 2.0});
  const Formula rule = scenario.rule("pos");

  bool saw_hand_case = false;
  for (uint64_t seed = 0; seed < 40; ++seed) {
    const Estimate est = ams_estimate(scenario, rule, 4, 1, seed);
    REQUIRE(!est.extinction);

    // Every run must satisfy the product form with integer failure counts.
    double product = 1.0;
    for (int k : est.discards_per_stage) product *= (4.0 - k) / 4.0;
    bool matches_some_count = false;
    for (int fails = 0; fails <= 4; ++fails) {
      if (est.p_hat == product * fails / 4.0) matches_some_count = true;
    }
    CHECK(matches_some_count);

    if (est.discards_per_stage == std::vector<int>{1, 1} && est.p_hat == 9.0 / 32.0) {
      CHECK(est.levels == std::vector<double>{2.0, 1.0});
      saw_hand_case = true;
    }
  }
  CHECK(saw_hand_case);
}

TEST_CASE("splitting collapses to monte carlo when the easy case needs no stages") {
  auto scenario = easy_walk();
  const Formula rule = scenario.rule("barrier");
  const int N = 200;
  // With ~half the runs failing, the 150th-largest level is already negative,
  // so no discard round happens and the estimate is the plain fraction over
  // the identical stream assignment.
  const Estimate ams = ams_estimate(scenario, rule, N, 150, 21);
  const Estimate mc = mc_estimate(scenario, rule, N, 21);
  CHECK(ams.levels.empty());
  CHECK(ams.p_hat == mc.p_hat);
  CHECK(ams.trajectories_run == N);
}

TEST_CASE("splitting estimates the rare barrier probability") {
  auto scenario = rare_walk();
  const Formula rule = scenario.rule("barrier");
  const int reps = 10;
  double sum = 0.0;
  for (int r = 0; r < reps; ++r) {
    const Estimate est = ams_estimate(scenario, rule, 1000, 100, 1000 + r);
    REQUIRE(!est.extinction);
    CHECK(est.p_hat > 0.0);
    for (size_t m = 1; m < est.levels.size(); ++m) {
      CHECK(est.levels[m] < est.levels[m - 1]);
    }
    int total_discards = 0;
    for (int k : est.discards_per_stage) total_discards += k;
    CHECK(est.trajectories_run == 1000 + total_discards);
    sum += est.p_hat;
  }
  const double mean = sum / reps;
  CHECK(std::abs(mean - fixtures::kRareP) < 0.30 * fixtures::kRareP);
}

TEST_CASE("splitting is invariant to the worker count") {
  ToyWalkConfig cfg;
  cfg.barrier = 8.0;
  ToyWalkScenario scenario(cfg);
  const Formula rule = scenario.rule("barrier");
  EstimatorOptions serial, parallel;
  parallel.workers = 4;
  const Estimate a = ams_estimate(scenario, rule, 200, 20, 5, serial);
  const Estimate b = ams_estimate(scenario, rule, 200, 20, 5, parallel);
  CHECK(a.p_hat == b.p_hat);
  CHECK(a.levels == b.levels);
  CHECK(a.discards_per_stage == b.discards_per_stage);
  CHECK(a.total_simulation_steps == b.total_simulation_steps);
  CHECK(a.trajectories_run == b.trajectories_run);
  CHECK(!a.levels.empty());  // the moderate barrier actually exercises stages
}

TEST_CASE("identity-proposal importance sampling equals monte carlo") {
  auto scenario = easy_walk();
  const Formula rule = scenario.rule("barrier");
  const int N = 2000;
  const Estimate is = is_fixed_estimate(scenario, rule, ProposalParams{}, N, 13);
  const Estimate mc = mc_estimate(scenario, rule, N, 13);
  CHECK(is.p_hat == mc.p_hat);
  CHECK(is.effective_sample_size == doctest::Approx(static_cast<double>(N)));
  CHECK(is.std_error == doctest::Approx(mc.std_error));
}

TEST_CASE("mean-shifted importance sampling recovers the rare probability") {
  auto scenario = rare_walk();
  const Formula rule = scenario.rule("barrier");
  ProposalParams proposal;
  proposal.noise_mean_shift[0] = fixtures::kRareBarrier / 40.0;  // exponential tilt
  const int N = 20000;
  const Estimate est = is_fixed_estimate(scenario, rule, proposal, N, 17);
  CHECK(std::abs(est.p_hat - fixtures::kRareP) < 5.0 * est.std_error);
  CHECK(std::abs(est.p_hat - fixtures::kRareP) < 0.30 * fixtures::kRareP);
  // A full exponential tilt has log-weight spread ~ shift * sqrt(T), so the
  // effective sample size is legitimately tiny even when the estimate lands.
  CHECK(est.effective_sample_size > 1.0);
  CHECK(est.effective_sample_size < static_cast<double>(N));
}

TEST_CASE("cross entropy matches the brute-force reference on the easy barrier") {
  auto scenario = easy_walk();
  const Formula rule = scenario.rule("barrier");
  const Estimate est = ce_estimate(scenario, rule, 2000, 3, 0.25, 29);
  CHECK(!est.extinction);
  CHECK(est.levels.size() == 3);
  CHECK(est.discards_per_stage == std::vector<int>{1500, 1500, 1500});
  CHECK(est.trajectories_run == 6000);
  CHECK(std::abs(est.p_hat - fixtures::kHalfP) < 0.05);
  CHECK(est.effective_sample_size > 10.0);
}

TEST_CASE("cross entropy is invariant to the worker count") {
  auto scenario = easy_walk();
  const Formula rule = scenario.rule("barrier");
  EstimatorOptions serial, parallel;
  parallel.workers = 3;
  const Estimate a = ce_estimate(scenario, rule, 400, 2, 0.25, 31, serial);
  const Estimate b = ce_estimate(scenario, rule, 400, 2, 0.25, 31, parallel);
  CHECK(a.p_hat == b.p_hat);
  CHECK(a.levels == b.levels);
}

TEST_CASE("monte carlo at small N can miss the rare lane-change rule entirely") {
  LaneChangeScenario scenario;
  const Formula rule = scenario.rule("phi4");
  EstimatorOptions opt;
  opt.workers = 4;
  opt.snapshot_stride = 4;
  const Estimate est = mc_estimate(scenario, rule, 250, 6, opt);
  CHECK(est.p_hat == 0.0);
  CHECK(est.std_error == 0.0);
}

TEST_CASE("naive miss-rate proposal collapses the effective sample size") {
  // Suppressing half of all detections concentrates nearly all weight on a
  // handful of trajectories; the estimate is a severe underestimate and the
  // ESS diagnostic is the tell.
  LaneChangeScenario scenario;
  const Formula rule = scenario.rule("phi4");
  ProposalParams naive;
  naive.miss_rate = 0.5;
  naive.noise_sigma_scale = 1.0;
  EstimatorOptions opt;
  opt.workers = 4;
  opt.snapshot_stride = 4;
  const int N = 250;
  const Estimate est = is_fixed_estimate(scenario, rule, naive, N, 0, opt);
  CHECK(est.effective_sample_size < 0.05 * N);
}

TEST_CASE("cross entropy emits a level trace that exposes stalls") {
  LaneChangeScenario scenario;
  const Formula rule = scenario.rule("phi4");
  EstimatorOptions opt;
  opt.workers = 4;
  opt.snapshot_stride = 4;
  const Estimate est = ce_estimate(scenario, rule, 250, 6, 0.1, 0, opt);
  REQUIRE(est.levels.size() == 6);
  // The elite threshold never reaches the failure level; the emitted trace
  // makes the stall visible (it is not even monotone).
  for (double g : est.levels) CHECK(g > 0.0);
}

TEST_CASE("cross entropy stays within an order of magnitude on the rare walk") {
  auto scenario = rare_walk();
  const Formula rule = scenario.rule("barrier");
  const Estimate est = ce_estimate(scenario, rule, 2000, 4, 0.1, 11);
  CHECK(est.p_hat > 0.1 * fixtures::kRareP);
  CHECK(est.p_hat < 10.0 * fixtures::kRareP);
}

TEST_CASE("estimators validate their arguments") {
  auto scenario = easy_walk();
  const Formula rule = scenario.rule("barrier");
  CHECK_THROWS_AS(mc_estimate(scenario, rule, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(ams_estimate(scenario, rule, 10, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(ams_estimate(scenario, rule, 10, 10, 1), std::invalid_argument);
  ProposalParams bad;
  bad.miss_rate = 1.0;
  CHECK_THROWS_AS(is_fixed_estimate(scenario, rule, bad, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(ce_estimate(scenario, rule, 100, 1, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(ce_estimate(scenario, rule, 100, 1, 0.6, 1), std::invalid_argument);
  CHECK_THROWS_AS(ce_estimate(scenario, rule, 1, 1, 0.25, 1), std::invalid_argument);
}

TEST_CASE("estimate serialization carries the wire fields") {
  auto scenario = easy_walk();
  const Formula rule = scenario.rule("barrier");
  const Estimate est = ams_estimate(scenario, rule, 50, 5, 3);
  const std::string json = est.to_json();
  for (const char* field :
       {"p_hat", "method", "levels", "discards_per_stage", "total_simulation_steps",
        "trajectories_run", "extinction", "master_seed", "wall_time_s"}) {
    CHECK(json.find(std::string("\"") + field + "\"") != std::string::npos);
  }
  const std::string csv = est.levels_csv();
  CHECK(csv.rfind("stage,gamma,discards\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + static_cast<long>(est.levels.size()));
}
