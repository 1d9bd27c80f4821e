#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "stlsplit/parser.hpp"
#include "stlsplit/robustness.hpp"
#include "stlsplit/sliding_window.hpp"
#include "stlsplit/worklist.hpp"

using namespace stlsplit;

namespace {

std::shared_ptr<const PredicateTable> preds() {
  auto table = std::make_shared<PredicateTable>();
  (*table)["p"] = [](std::span<const double> x) { return x[0]; };
  (*table)["q"] = [](std::span<const double> x) { return 0.5 - x[0]; };
  return table;
}

std::vector<std::vector<double>> trace(int n) {
  std::mt19937 rng(1);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<std::vector<double>> out;
  double x = 0;
  for (int i = 0; i < n; ++i) {
    x += 0.3 * d(rng);
    out.push_back({x});
  }
  return out;
}

void BM_SlidingWindowMin(benchmark::State& state) {
  std::mt19937 rng(2);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> data(static_cast<size_t>(state.range(0)));
  for (auto& v : data) v = d(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sliding_window_min(data, 16));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SlidingWindowMin)->Range(1 << 8, 1 << 16);

void BM_WorklistIngest(benchmark::State& state) {
  auto table = preds();
  Formula f = parse_formula("G[0,8] (p -> F[0,4] q)", {"p", "q"});
  auto tr = trace(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    WorkList wl(f, table);
    for (const auto& x : tr) wl.ingest(x);
    benchmark::DoNotOptimize(wl.robustness());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_WorklistIngest)->Range(64, 4096);

void BM_BatchRobustness(benchmark::State& state) {
  auto table = preds();
  Formula f = parse_formula("G[0,8] (p -> F[0,4] q)", {"p", "q"});
  auto tr = trace(static_cast<int>(state.range(0)));
  const int t = static_cast<int>(tr.size()) - 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(batch_robustness(f, *table, tr, 0, t));
  }
}
BENCHMARK(BM_BatchRobustness)->Range(64, 1024);

}  // namespace

BENCHMARK_MAIN();
