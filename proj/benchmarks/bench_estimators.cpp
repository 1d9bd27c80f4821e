#include <benchmark/benchmark.h>

#include "stlsplit/estimators.hpp"
#include "stlsplit/lane_change.hpp"
#include "stlsplit/runner.hpp"
#include "stlsplit/toy_walk.hpp"

using namespace stlsplit;

namespace {

void BM_ToyWalkMonteCarlo(benchmark::State& state) {
  ToyWalkScenario scenario{ToyWalkConfig{}};
  const Formula rule = scenario.rule("barrier");
  const int n = static_cast<int>(state.range(0));
  uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mc_estimate(scenario, rule, n, seed++).p_hat);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ToyWalkMonteCarlo)->Arg(256)->Arg(1024);

void BM_ToyWalkSplitting(benchmark::State& state) {
  ToyWalkScenario scenario{ToyWalkConfig{}};
  const Formula rule = scenario.rule("barrier");
  const int n = static_cast<int>(state.range(0));
  uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ams_estimate(scenario, rule, n, n / 10, seed++).p_hat);
  }
}
BENCHMARK(BM_ToyWalkSplitting)->Arg(256)->Arg(1024);

void BM_LaneChangeTrajectory(benchmark::State& state) {
  LaneChangeScenario scenario;
  const Formula rule = scenario.rule("phi1");
  uint64_t seed = 0;
  for (auto _ : state) {
    auto sim = scenario.make_simulator(nullptr);
    const TrajectoryRun run = run_trajectory(scenario, *sim, scenario.horizon(),
                                             NoiseStream(seed++, 0), rule, 4);
    benchmark::DoNotOptimize(run.final_level());
  }
  state.SetItemsProcessed(state.iterations() * scenario.horizon());
}
BENCHMARK(BM_LaneChangeTrajectory);

void BM_LaneChangeResume(benchmark::State& state) {
  LaneChangeScenario scenario;
  const Formula rule = scenario.rule("phi1");
  auto sim = scenario.make_simulator(nullptr);
  const TrajectoryRun source = run_trajectory(scenario, *sim, scenario.horizon(),
                                              NoiseStream(1, 0), rule, 4);
  const int t_splice = scenario.horizon() / 2;
  uint64_t seed = 0;
  for (auto _ : state) {
    auto fresh = scenario.make_simulator(nullptr);
    const TrajectoryRun run = resume_trajectory(
        scenario, source, t_splice, *fresh, scenario.horizon(),
        NoiseStream(1, 1 + seed++), rule);
    benchmark::DoNotOptimize(run.final_level());
  }
}
BENCHMARK(BM_LaneChangeResume);

}  // namespace

BENCHMARK_MAIN();
