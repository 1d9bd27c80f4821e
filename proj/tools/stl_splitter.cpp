// Command-line front end: estimator runs on builtin or file-configured
// scenarios, standalone monitoring of recorded traces, and self-validation
// suites. Exit codes: 0 ok, 1 validation failure, 2 config error,
// 3 extinction.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stlsplit/estimators.hpp"
#include "stlsplit/lane_change.hpp"
#include "stlsplit/parser.hpp"
#include "stlsplit/robustness.hpp"
#include "stlsplit/runner.hpp"
#include "stlsplit/toy_walk.hpp"
#include "stlsplit/worklist.hpp"

using namespace stlsplit;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::unique_ptr<Scenario> make_scenario(const std::string& builtin,
                                        const std::string& path) {
  if (builtin.empty() == path.empty()) {
    throw ConfigError("provide exactly one of --builtin and --scenario");
  }
  std::string name = builtin;
  nlohmann::json config = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("invalid scenario JSON: " + std::string(e.what()));
    }
    if (!doc.contains("builtin")) {
      throw ConfigError("scenario file needs a \"builtin\" field");
    }
    name = doc["builtin"].get<std::string>();
    config = doc.value("config", nlohmann::json::object());
  }
  if (name == "lane_change") {
    if (config.empty()) return std::make_unique<LaneChangeScenario>();
    return std::make_unique<LaneChangeScenario>(LaneChangeConfig::from_json(config.dump()));
  }
  if (name == "toy_walk") {
    ToyWalkConfig cfg;
    cfg.drift = config.value("drift", cfg.drift);
    cfg.sigma = config.value("sigma", cfg.sigma);
    cfg.barrier = config.value("barrier", cfg.barrier);
    cfg.horizon = config.value("horizon", cfg.horizon);
    cfg.dt = config.value("dt", cfg.dt);
    return std::make_unique<ToyWalkScenario>(cfg);
  }
  throw ConfigError("unknown scenario: " + name + " (builtins: lane_change, toy_walk)");
}

Formula resolve_formula(const Scenario& scenario, const std::string& rule,
                        const std::string& text) {
  if (!rule.empty() && !text.empty()) {
    throw ConfigError("provide at most one of --rule and --formula");
  }
  if (rule.empty() && text.empty()) {
    return scenario.rule(scenario.rule_names().front());  // builtin default
  }
  if (!rule.empty()) {
    try {
      return scenario.rule(rule);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  try {
    return parse_formula(text, predicate_names(*scenario.predicates()));
  } catch (const ParseError& e) {
    throw ConfigError(std::string("formula: ") + e.what());
  }
}

uint64_t default_seed() {
  if (const char* env = std::getenv("STL_SPLITTER_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 0;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write: " + path);
  out << text;
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

struct EstimateArgs {
  std::string builtin, scenario_path, rule, formula;
  std::string method = "ams";
  int n = 250;
  int k = 25;
  int stages = 5;
  double elite_frac = 0.1;
  uint64_t seed = default_seed();
  int workers = 1;
  std::string out, trace_out;
};

int cmd_estimate(const EstimateArgs& a) {
  auto scenario = make_scenario(a.builtin, a.scenario_path);
  const Formula formula = resolve_formula(*scenario, a.rule, a.formula);

  EstimatorOptions opt;
  opt.workers = a.workers;
  Estimate est;
  try {
    if (a.method == "mc") {
      est = mc_estimate(*scenario, formula, a.n, a.seed, opt);
    } else if (a.method == "ams") {
      est = ams_estimate(*scenario, formula, a.n, a.k, a.seed, opt);
    } else if (a.method == "is") {
      // The fixed proposal is the naive baseline: drop half of all
      // detections, leave the noise untouched.
      ProposalParams naive;
      naive.miss_rate = 0.5;
      est = is_fixed_estimate(*scenario, formula, naive, a.n, a.seed, opt);
    } else if (a.method == "ce") {
      est = ce_estimate(*scenario, formula, a.n, a.stages, a.elite_frac, a.seed, opt);
    } else {
      throw ConfigError("unknown method: " + a.method + " (mc, ams, is, ce)");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (!a.out.empty()) write_file(a.out, est.to_json() + "\n");
  if (!a.trace_out.empty()) write_file(a.trace_out, est.levels_csv());

  std::printf("method=%s p_hat=%.6e trajectories=%d stages=%zu steps=%ld%s\n",
              est.method.c_str(), est.p_hat, est.trajectories_run, est.levels.size(),
              est.total_simulation_steps, est.extinction ? " extinction" : "");
  if (est.extinction) {
    std::cerr << "error: splitting went extinct; the estimate is a diagnostic "
                 "upper-bound flavour, not a valid probability\n";
    return 3;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// monitor
// ---------------------------------------------------------------------------

struct MonitorArgs {
  std::string trace_path;
  std::string builtin, rule, formula;
  std::string out;
};

struct Csv {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

Csv read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace: " + path);
  Csv csv;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty trace: " + path);
  std::stringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) csv.columns.push_back(cell);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::vector<double> values;
    while (std::getline(row, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("trace line " + std::to_string(lineno) +
                          ": not a number: " + cell);
      }
    }
    if (values.size() != csv.columns.size()) {
      throw ConfigError("trace line " + std::to_string(lineno) + ": expected " +
                        std::to_string(csv.columns.size()) + " columns, got " +
                        std::to_string(values.size()));
    }
    csv.rows.push_back(std::move(values));
  }
  if (csv.rows.empty()) throw ConfigError("trace has no data rows: " + path);
  return csv;
}

int cmd_monitor(const MonitorArgs& a) {
  Csv csv = read_csv(a.trace_path);

  // A leading "t" column is bookkeeping, not signal.
  size_t first = (!csv.columns.empty() && csv.columns[0] == "t") ? 1 : 0;

  Formula formula = Formula::top();
  std::shared_ptr<const PredicateTable> preds;
  if (!a.builtin.empty() || !a.rule.empty()) {
    // Scenario mode: columns are the scenario's combined state vector.
    if (a.builtin.empty() || a.rule.empty() || !a.formula.empty()) {
      throw ConfigError("scenario mode needs --builtin and --rule (no --formula)");
    }
    auto scenario = make_scenario(a.builtin, "");
    formula = resolve_formula(*scenario, a.rule, "");
    preds = scenario->predicates();
  } else {
    // Signal mode: every column is a named signal usable as a predicate.
    if (a.formula.empty()) throw ConfigError("provide --formula or --builtin/--rule");
    auto table = std::make_shared<PredicateTable>();
    std::set<std::string> names;
    for (size_t c = first; c < csv.columns.size(); ++c) {
      const size_t idx = c - first;
      (*table)[csv.columns[c]] = [idx](std::span<const double> x) { return x[idx]; };
      names.insert(csv.columns[c]);
    }
    try {
      formula = parse_formula(a.formula, names);
    } catch (const ParseError& e) {
      throw ConfigError(std::string("formula: ") + e.what());
    }
    preds = table;
  }

  WorkList wl(formula, preds, static_cast<int>(csv.rows.size()) - 1);
  std::ostringstream result;
  result << "t,robustness\n";
  char buf[64];
  for (size_t t = 0; t < csv.rows.size(); ++t) {
    std::span<const double> state(csv.rows[t].data() + first,
                                  csv.rows[t].size() - first);
    wl.ingest(state);
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", t, wl.robustness());
    result << buf;
  }
  if (a.out.empty()) {
    std::cout << result.str();
  } else {
    write_file(a.out, result.str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

// Brute-force Monte-Carlo references for the toy barrier walk (drift 0,
// sigma 1, T = 40), 1e7 trajectories, master seed 424242.
constexpr double kRareBarrier = 24.2;
constexpr double kRareP = 9.30e-5;
constexpr double kHalfBarrier = 3.6;
constexpr double kHalfP = 0.5096026;

Formula random_formula(std::mt19937& rng, int max_depth) {
  auto interval = [&rng]() {
    std::uniform_int_distribution<int> lo_d(0, 4);
    std::uniform_int_distribution<int> len_d(0, 6);
    std::bernoulli_distribution unbounded(0.25);
    const int lo = lo_d(rng);
    if (unbounded(rng)) return Interval::open_ended(lo);
    return Interval::bounded(lo, lo + len_d(rng));
  };
  if (max_depth <= 0) {
    static const char* names[] = {"p", "q", "r"};
    std::uniform_int_distribution<int> pick_leaf(0, 2);
    return Formula::pred(names[pick_leaf(rng)]);
  }
  std::uniform_int_distribution<int> pick(0, 10);
  switch (pick(rng)) {
    case 0: return random_formula(rng, 0);
    case 1: return Formula::negate(random_formula(rng, max_depth - 1));
    case 2:
      return Formula::conj(random_formula(rng, max_depth - 1),
                           random_formula(rng, max_depth - 1));
    case 3:
      return Formula::disj(random_formula(rng, max_depth - 1),
                           random_formula(rng, max_depth - 1));
    case 4:
      return Formula::implies(random_formula(rng, max_depth - 1),
                              random_formula(rng, max_depth - 1));
    case 5: return Formula::always(interval(), random_formula(rng, max_depth - 1));
    case 6: return Formula::eventually(interval(), random_formula(rng, max_depth - 1));
    case 7:
      return Formula::until(interval(), random_formula(rng, max_depth - 1),
                            random_formula(rng, max_depth - 1));
    case 8:
      return Formula::historically(interval(), random_formula(rng, max_depth - 1));
    case 9: return Formula::once(interval(), random_formula(rng, max_depth - 1));
    default: return Formula::top();
  }
}

int validate_differential(bool quick) {
  const int pairs = quick ? 200 : 1000;
  auto preds = std::make_shared<PredicateTable>();
  (*preds)["p"] = [](std::span<const double> x) { return x[0]; };
  (*preds)["q"] = [](std::span<const double> x) { return 0.5 - x[0]; };
  (*preds)["r"] = [](std::span<const double> x) { return x[1]; };

  std::mt19937 rng(2024);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> len_d(1, 50);
  int mismatches = 0;
  double worst = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const Formula f = random_formula(rng, 4);
    const int T = len_d(rng);
    std::vector<std::vector<double>> states;
    double x0 = 0.0, x1 = 0.0;
    for (int t = 0; t < T; ++t) {
      x0 += 0.3 * noise(rng);
      x1 += 0.3 * noise(rng);
      states.push_back({x0, x1});
    }
    WorkList wl(f, preds, T - 1);
    for (int t = 0; t < T; ++t) {
      wl.ingest(states[static_cast<size_t>(t)]);
      const double batch = batch_robustness(f, *preds, states, 0, t);
      const double incremental = wl.robustness();
      const double delta =
          (std::isinf(batch) || std::isinf(incremental))
              ? (batch == incremental ? 0.0 : std::numeric_limits<double>::infinity())
              : std::abs(batch - incremental);
      worst = std::max(worst, delta);
      if (delta > 1e-9) ++mismatches;
    }
  }
  std::printf("differential: %d formula/trace pairs, %d mismatches, worst |delta| %.3g\n",
              pairs, mismatches, worst);
  return mismatches == 0 ? 0 : 1;
}

int validate_oracle(bool quick) {
  int failures = 0;
  auto check = [&failures](bool ok, const std::string& line) {
    std::printf("%s: %s\n", ok ? "ok" : "FAIL", line.c_str());
    if (!ok) ++failures;
  };
  EstimatorOptions opt;
  opt.workers = 4;

  {
    ToyWalkConfig cfg;
    cfg.barrier = kHalfBarrier;
    ToyWalkScenario scenario(cfg);
    const int n = quick ? 20000 : 100000;
    const Estimate mc = mc_estimate(scenario, scenario.rule("barrier"), n, 1, opt);
    const double se = std::sqrt(kHalfP * (1 - kHalfP) / n);
    char line[128];
    std::snprintf(line, sizeof(line), "mc easy barrier: p_hat %.5f vs oracle %.5f (n=%d)",
                  mc.p_hat, kHalfP, n);
    check(std::abs(mc.p_hat - kHalfP) < 4 * se, line);
  }
  {
    ToyWalkConfig cfg;
    cfg.barrier = kRareBarrier;
    ToyWalkScenario scenario(cfg);
    const Formula rule = scenario.rule("barrier");
    const int reps = quick ? 10 : 50;
    double sum = 0.0, sum2 = 0.0;
    for (int r = 0; r < reps; ++r) {
      const Estimate est = ams_estimate(scenario, rule, 1000, 100, 4000 + r, opt);
      sum += est.p_hat;
      sum2 += est.p_hat * est.p_hat;
    }
    const double mean = sum / reps;
    const double var = sum2 / reps - mean * mean;
    const double rel_std = std::sqrt(std::max(0.0, var)) / kRareP;
    const double tol = quick ? 0.40 : 0.25;
    char line[160];
    std::snprintf(line, sizeof(line),
                  "ams rare barrier: mean %.3e vs oracle %.3e (%d reps, rel std %.2f)",
                  mean, kRareP, reps, rel_std);
    check(std::abs(mean - kRareP) < tol * kRareP && rel_std <= 1.0, line);
  }
  std::printf("oracle: %s\n", failures == 0 ? "all checks passed" : "FAILURES");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"STL rare-event splitting toolkit"};
  app.require_subcommand(1);

  EstimateArgs ea;
  CLI::App* est = app.add_subcommand("estimate", "Run a failure-probability estimator");
  est->add_option("--builtin", ea.builtin, "Builtin scenario: lane_change or toy_walk");
  est->add_option("--scenario", ea.scenario_path, "Scenario JSON file");
  est->add_option("--rule", ea.rule, "Named rule, e.g. phi1");
  est->add_option("--formula", ea.formula, "STL formula text");
  est->add_option("--method", ea.method, "mc, ams, is, or ce (default ams)");
  est->add_option("--n", ea.n, "Trajectories per run/stage (default 250)");
  est->add_option("--k", ea.k, "Splitting discard amount (default 25)");
  est->add_option("--stages", ea.stages, "Cross-entropy stages (default 5)");
  est->add_option("--elite-frac", ea.elite_frac, "Cross-entropy elite fraction");
  est->add_option("--seed", ea.seed, "Master seed (env STL_SPLITTER_SEED, then 0)");
  est->add_option("--workers", ea.workers, "Worker threads (default 1)");
  est->add_option("--out", ea.out, "Write the estimate JSON here");
  est->add_option("--trace-out", ea.trace_out, "Write the level-trace CSV here");

  MonitorArgs ma;
  CLI::App* mon = app.add_subcommand("monitor", "Robustness trace of a recorded run");
  mon->add_option("trace", ma.trace_path, "CSV with a header row")->required();
  mon->add_option("--builtin", ma.builtin, "Scenario whose predicates to use");
  mon->add_option("--rule", ma.rule, "Named rule of the builtin");
  mon->add_option("--formula", ma.formula, "STL formula over the CSV columns");
  mon->add_option("--out", ma.out, "Write t,robustness CSV here (default stdout)");

  std::string suite;
  bool quick = false;
  CLI::App* val = app.add_subcommand("validate", "Self-check suites");
  val->add_option("suite", suite, "differential or oracle")->required();
  val->add_flag("--quick", quick, "Reduced repetitions, widened bounds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (est->parsed()) return cmd_estimate(ea);
    if (mon->parsed()) return cmd_monitor(ma);
    if (suite == "differential") return validate_differential(quick);
    if (suite == "oracle") return validate_oracle(quick);
    throw ConfigError("unknown suite: " + suite + " (differential, oracle)");
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
