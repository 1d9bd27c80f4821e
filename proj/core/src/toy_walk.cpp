#include "stlsplit/toy_walk.hpp"

#include <cmath>
#include <stdexcept>

#include "stlsplit/runner.hpp"

namespace stlsplit {

namespace {

double log_normal_pdf(double x, double mean, double sigma) {
  static const double kLogSqrt2Pi = 0.9189385332046727;
  const double z = (x - mean) / sigma;
  return -0.5 * z * z - std::log(sigma) - kLogSqrt2Pi;
}

class ToyWalkSimulator : public Simulator {
 public:
  ToyWalkSimulator(const ToyWalkConfig& cfg, ProposalParams proposal)
      : cfg_(cfg), proposal_(proposal) {}

  int timestep() const override { return t_; }

  std::vector<double> current_state() const override { return {x_}; }

  StepResult step(NoiseStream& stream) override {
    StepResult r;
    const double shift = proposal_.noise_mean_shift[0];
    const double scale = proposal_.noise_sigma_scale;
    const double z = shift + scale * stream.normal();
    if (!proposal_.is_identity()) {
      r.log_weight = log_normal_pdf(z, 0.0, 1.0) - log_normal_pdf(z, shift, scale);
    }
    x_ += cfg_.drift + cfg_.sigma * z;
    ++t_;
    r.action = {};
    r.noise = {z};
    return r;
  }

  SimulatorSnapshot snapshot() const override {
    SimulatorSnapshot s;
    s.timestep = t_;
    s.blob = {x_};
    s.state = {x_};
    return s;
  }

  void restore(const SimulatorSnapshot& snap) override {
    if (snap.blob.size() != 1) throw std::runtime_error("toy walk snapshot malformed");
    x_ = snap.blob[0];
    t_ = snap.timestep;
  }

 private:
  ToyWalkConfig cfg_;
  ProposalParams proposal_;
  double x_ = 0.0;
  int t_ = 0;
};

}  // namespace

ToyWalkScenario::ToyWalkScenario(ToyWalkConfig cfg) : cfg_(cfg) {
  if (cfg_.sigma < 0) throw std::invalid_argument("sigma must be non-negative");
  auto table = std::make_shared<PredicateTable>();
  const double barrier = cfg_.barrier;
  (*table)["level"] = [barrier](std::span<const double> x) { return barrier - x[0]; };
  preds_ = table;
}

std::unique_ptr<Simulator> ToyWalkScenario::make_simulator(
    const ProposalParams* proposal) const {
  return std::make_unique<ToyWalkSimulator>(cfg_, proposal ? *proposal : ProposalParams{});
}

Formula ToyWalkScenario::rule(const std::string& name) const {
  if (name != "barrier") throw std::invalid_argument("unknown toy walk rule: " + name);
  return Formula::always(Interval::open_ended(0), Formula::pred("level"));
}

ProposalParams ToyWalkScenario::fit_proposal(const std::vector<const TrajectoryRun*>& elites,
                                             const std::vector<double>& weights) const {
  double wsum = 0.0, mean = 0.0;
  for (size_t i = 0; i < elites.size(); ++i) {
    for (const auto& rec : elites[i]->noise_log) {
      wsum += weights[i];
      mean += weights[i] * rec[0];
    }
  }
  if (wsum <= 0.0) throw std::runtime_error("degenerate elite weights");
  mean /= wsum;
  double var = 0.0;
  for (size_t i = 0; i < elites.size(); ++i) {
    for (const auto& rec : elites[i]->noise_log) {
      const double d = rec[0] - mean;
      var += weights[i] * d * d;
    }
  }
  var /= wsum;
  ProposalParams p;
  p.noise_mean_shift[0] = mean;
  p.noise_sigma_scale = std::sqrt(var);
  return p;
}

}  // namespace stlsplit
