#include "stlsplit/estimators.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "stlsplit/runner.hpp"

namespace stlsplit {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Deterministic parallel map: task i only depends on i, so scheduling
/// cannot perturb results.
void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mu;
  const int count = std::min(workers, n);
  pool.reserve(static_cast<size_t>(count));
  for (int w = 0; w < count; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

constexpr uint64_t kSelectionStreamId = 0x8000000000000000ULL;
constexpr double kLogWeightFloor = -745.0;  // exp() underflow boundary

double clamped_weight(double log_w) { return std::exp(std::max(log_w, kLogWeightFloor)); }

std::vector<TrajectoryRun> run_batch(const Scenario& scenario, const Formula& formula,
                                     int N, uint64_t seed, uint64_t first_stream,
                                     const ProposalParams* proposal,
                                     const EstimatorOptions& opt) {
  std::vector<TrajectoryRun> runs(static_cast<size_t>(N));
  parallel_for(N, opt.workers, [&](int i) {
    auto sim = scenario.make_simulator(proposal);
    runs[static_cast<size_t>(i)] =
        run_trajectory(scenario, *sim, scenario.horizon(),
                       NoiseStream(seed, first_stream + static_cast<uint64_t>(i)), formula,
                       opt.snapshot_stride);
  });
  return runs;
}

long total_steps(const std::vector<TrajectoryRun>& runs) {
  long s = 0;
  for (const auto& r : runs) s += r.steps_simulated;
  return s;
}

}  // namespace

Estimate mc_estimate(const Scenario& scenario, const Formula& formula, int N,
                     uint64_t seed, const EstimatorOptions& opt) {
  if (N < 1) throw std::invalid_argument("mc_estimate: N must be >= 1");
  const auto start = Clock::now();
  auto runs = run_batch(scenario, formula, N, seed, 0, nullptr, opt);

  int failures = 0;
  for (const auto& r : runs) {
    if (r.final_level() < opt.gamma_final) ++failures;
  }
  Estimate est;
  est.method = "mc";
  est.p_hat = static_cast<double>(failures) / N;
  est.std_error = std::sqrt(est.p_hat * (1.0 - est.p_hat) / N);
  est.total_simulation_steps = total_steps(runs);
  est.trajectories_run = N;
  est.master_seed = seed;
  est.wall_time_s = seconds_since(start);
  return est;
}

Estimate ams_estimate(const Scenario& scenario, const Formula& formula, int N, int K,
                      uint64_t seed, const EstimatorOptions& opt) {
  if (K < 1 || K >= N) throw std::invalid_argument("ams_estimate: need 1 <= K < N");
  const auto start = Clock::now();
  const int T = scenario.horizon();

  std::vector<TrajectoryRun> runs = run_batch(scenario, formula, N, seed, 0, nullptr, opt);
  StreamAllocator alloc(seed, static_cast<uint64_t>(N));
  NoiseStream selection(seed, kSelectionStreamId);

  Estimate est;
  est.method = "ams";
  est.master_seed = seed;
  est.trajectories_run = N;
  long steps = total_steps(runs);

  double prev_gamma = std::numeric_limits<double>::infinity();
  double product = 1.0;
  constexpr int kMaxStages = 100000;

  for (int stage = 0; stage < kMaxStages; ++stage) {
    // Sort final levels ascending; ties break by slot index for determinism.
    std::vector<int> order(static_cast<size_t>(N));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double la = runs[static_cast<size_t>(a)].final_level();
      const double lb = runs[static_cast<size_t>(b)].final_level();
      return la != lb ? la < lb : a < b;
    });
    // gamma_m = K-th largest final level, so the "L >= gamma_m" discard takes
    // the K safest trajectories (more under ties) and every survivor sits
    // strictly below gamma_m, which the clone step requires.
    const double gamma_m =
        runs[static_cast<size_t>(order[static_cast<size_t>(N - K)])].final_level();

    if (gamma_m <= opt.gamma_final) break;  // threshold reached; no discard round

    if (gamma_m >= prev_gamma) {
      est.extinction = true;  // levels stopped decreasing (robustness ties)
      break;
    }

    std::vector<int> survivors;
    std::vector<int> discarded;
    for (int i = 0; i < N; ++i) {
      if (runs[static_cast<size_t>(i)].final_level() >= gamma_m) {
        discarded.push_back(i);
      } else {
        survivors.push_back(i);
      }
    }
    if (survivors.empty()) {
      est.extinction = true;
      break;
    }

    est.levels.push_back(gamma_m);
    est.discards_per_stage.push_back(static_cast<int>(discarded.size()));
    product *= static_cast<double>(N - discarded.size()) / N;
    prev_gamma = gamma_m;

    // Pick clone sources and assign fresh streams sequentially so the
    // parallel resume below cannot affect the draw order.
    struct ResumeTask {
      int slot;
      int source;
      int t_splice;
      uint64_t stream_id;
    };
    std::vector<ResumeTask> tasks;
    tasks.reserve(discarded.size());
    for (int slot : discarded) {
      const int src = survivors[static_cast<size_t>(selection.below(survivors.size()))];
      const int t_splice = runs[static_cast<size_t>(src)].first_level_below(gamma_m);
      if (t_splice < 0) throw std::logic_error("survivor never crossed gamma_m");
      tasks.push_back({slot, src, t_splice, alloc.fresh().stream_id()});
    }
    std::vector<TrajectoryRun> replacements(tasks.size());
    parallel_for(static_cast<int>(tasks.size()), opt.workers, [&](int k) {
      const ResumeTask& task = tasks[static_cast<size_t>(k)];
      auto sim = scenario.make_simulator(nullptr);
      replacements[static_cast<size_t>(k)] =
          resume_trajectory(scenario, runs[static_cast<size_t>(task.source)], task.t_splice,
                            *sim, T, NoiseStream(seed, task.stream_id), formula);
    });
    for (size_t k = 0; k < tasks.size(); ++k) {
      steps += replacements[k].steps_simulated;
      est.trajectories_run += 1;
      runs[static_cast<size_t>(tasks[k].slot)] = std::move(replacements[k]);
    }
  }

  int failures = 0;
  for (const auto& r : runs) {
    if (r.final_level() < opt.gamma_final) ++failures;
  }
  est.p_hat = product * static_cast<double>(failures) / N;
  est.total_simulation_steps = steps;
  est.wall_time_s = seconds_since(start);
  return est;
}

Estimate is_fixed_estimate(const Scenario& scenario, const Formula& formula,
                           const ProposalParams& proposal, int N, uint64_t seed,
                           const EstimatorOptions& opt) {
  if (N < 1) throw std::invalid_argument("is_fixed_estimate: N must be >= 1");
  if (proposal.miss_rate < 0.0 || proposal.miss_rate >= 1.0) {
    throw std::invalid_argument("is_fixed_estimate: miss_rate must be in [0, 1)");
  }
  const auto start = Clock::now();
  auto runs = run_batch(scenario, formula, N, seed, 0, &proposal, opt);

  double sum_w = 0.0, sum_w2 = 0.0, sum_fail = 0.0;
  for (const auto& r : runs) {
    const double w = clamped_weight(r.log_weight);
    sum_w += w;
    sum_w2 += w * w;
    if (r.final_level() < opt.gamma_final) sum_fail += w;
  }
  Estimate est;
  est.method = "is";
  est.p_hat = sum_fail / N;
  est.effective_sample_size = sum_w2 > 0.0 ? (sum_w * sum_w) / sum_w2 : 0.0;
  // Standard error of the unnormalized IS mean.
  double var = 0.0;
  for (const auto& r : runs) {
    const double x = (r.final_level() < opt.gamma_final) ? clamped_weight(r.log_weight) : 0.0;
    var += (x - est.p_hat) * (x - est.p_hat);
  }
  est.std_error = std::sqrt(var / N / N);
  est.total_simulation_steps = total_steps(runs);
  est.trajectories_run = N;
  est.master_seed = seed;
  est.wall_time_s = seconds_since(start);
  return est;
}

Estimate ce_estimate(const Scenario& scenario, const Formula& formula, int N_m, int M,
                     double elite_frac, uint64_t seed, const EstimatorOptions& opt) {
  if (N_m < 2 || M < 1) throw std::invalid_argument("ce_estimate: need N_m >= 2, M >= 1");
  if (elite_frac <= 0.0 || elite_frac > 0.5) {
    throw std::invalid_argument("ce_estimate: elite_frac must be in (0, 0.5]");
  }
  const auto start = Clock::now();

  Estimate est;
  est.method = "ce";
  est.master_seed = seed;
  ProposalParams proposal;  // identity: start from the target
  long steps = 0;

  for (int m = 0; m < M; ++m) {
    auto runs = run_batch(scenario, formula, N_m, seed,
                          static_cast<uint64_t>(m) * static_cast<uint64_t>(N_m),
                          &proposal, opt);
    steps += total_steps(runs);
    est.trajectories_run += N_m;

    std::vector<int> order(static_cast<size_t>(N_m));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double la = runs[static_cast<size_t>(a)].final_level();
      const double lb = runs[static_cast<size_t>(b)].final_level();
      return la != lb ? la < lb : a < b;
    });
    const int elites = std::max(1, static_cast<int>(std::floor(elite_frac * N_m)));
    est.levels.push_back(runs[static_cast<size_t>(order[static_cast<size_t>(elites - 1)])]
                             .final_level());
    est.discards_per_stage.push_back(N_m - elites);

    if (m == M - 1) {
      // Final stage: score as an importance-sampling estimate.
      double sum_fail = 0.0, sum_w = 0.0, sum_w2 = 0.0;
      for (const auto& r : runs) {
        const double w = clamped_weight(r.log_weight);
        sum_w += w;
        sum_w2 += w * w;
        if (r.final_level() < opt.gamma_final) sum_fail += w;
      }
      est.p_hat = sum_fail / N_m;
      est.effective_sample_size = sum_w2 > 0.0 ? (sum_w * sum_w) / sum_w2 : 0.0;
      break;
    }

    // Refit: weighted MLE over elite noise draws, self-normalized
    // target/proposal weights.
    std::vector<const TrajectoryRun*> elite_runs;
    std::vector<double> weights;
    double wsum = 0.0;
    for (int k = 0; k < elites; ++k) {
      const auto& r = runs[static_cast<size_t>(order[static_cast<size_t>(k)])];
      const double w = clamped_weight(r.log_weight);
      elite_runs.push_back(&r);
      weights.push_back(w);
      wsum += w;
    }
    if (wsum <= 0.0) {
      est.extinction = true;  // every elite weight underflowed
      break;
    }
    for (double& w : weights) w /= wsum;
    ProposalParams next = scenario.fit_proposal(elite_runs, weights);
    if (!(next.noise_sigma_scale > 1e-8)) {
      est.extinction = true;  // degenerate fit: zero-variance elite set
      break;
    }
    proposal = next;
  }

  est.total_simulation_steps = steps;
  est.wall_time_s = seconds_since(start);
  return est;
}

std::string Estimate::to_json() const {
  nlohmann::json j;
  j["p_hat"] = p_hat;
  j["method"] = method;
  j["levels"] = levels;
  j["discards_per_stage"] = discards_per_stage;
  j["total_simulation_steps"] = total_simulation_steps;
  j["trajectories_run"] = trajectories_run;
  j["extinction"] = extinction;
  j["master_seed"] = master_seed;
  j["wall_time_s"] = wall_time_s;
  return j.dump(2) + "\n";
}

std::string Estimate::levels_csv() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "stage,gamma,discards\n";
  for (size_t m = 0; m < levels.size(); ++m) {
    os << m << "," << levels[m] << ","
       << (m < discards_per_stage.size() ? discards_per_stage[m] : 0) << "\n";
  }
  return os.str();
}

}  // namespace stlsplit
