#pragma once

#include <memory>

#include "stlsplit/scenario.hpp"

namespace stlsplit {

/// Synthetic scalar random walk used as the statistical oracle for the
/// estimators: x_{t+1} = x_t + drift + sigma * z_t, x_0 = 0. The predicate
/// `level` has margin barrier - x_t, so G[0,inf] level fails exactly when
/// max_t x_t exceeds the barrier. The failure probability can be brute-forced
/// to arbitrary precision, which no closed-loop scenario allows.
struct ToyWalkConfig {
  double drift = 0.0;
  double sigma = 1.0;
  double barrier = 24.2;  // ~1e-4 failure probability at T=40 (see fixtures)
  int horizon = 40;
  double dt = 1.0;
};

class ToyWalkScenario : public Scenario {
 public:
  explicit ToyWalkScenario(ToyWalkConfig cfg = {});

  int horizon() const override { return cfg_.horizon; }
  double dt() const override { return cfg_.dt; }
  std::unique_ptr<Simulator> make_simulator(const ProposalParams* proposal) const override;
  std::shared_ptr<const PredicateTable> predicates() const override { return preds_; }
  Formula rule(const std::string& name) const override;
  std::vector<std::string> rule_names() const override { return {"barrier"}; }
  ProposalParams fit_proposal(const std::vector<const TrajectoryRun*>& elites,
                              const std::vector<double>& weights) const override;

  const ToyWalkConfig& config() const { return cfg_; }

 private:
  ToyWalkConfig cfg_;
  std::shared_ptr<const PredicateTable> preds_;
};

}  // namespace stlsplit
