#pragma once

#include <cstdint>

#include "stlsplit/estimate.hpp"
#include "stlsplit/formula.hpp"
#include "stlsplit/scenario.hpp"

namespace stlsplit {

struct EstimatorOptions {
  int workers = 1;
  double gamma_final = 0.0;
  int snapshot_stride = 1;
};

/// Raw Monte-Carlo: N independent monitored trajectories,
/// p_hat = fraction with final robustness < gamma_final.
Estimate mc_estimate(const Scenario& scenario, const Formula& formula, int N,
                     uint64_t seed, const EstimatorOptions& opt = {});

/// Adaptive multilevel splitting with online monitoring: stages of
/// sort / discard (K safest) / replenish-by-splicing until the adaptive
/// threshold reaches gamma_final.
Estimate ams_estimate(const Scenario& scenario, const Formula& formula, int N, int K,
                      uint64_t seed, const EstimatorOptions& opt = {});

/// Fixed-proposal importance sampling over the perception noise.
Estimate is_fixed_estimate(const Scenario& scenario, const Formula& formula,
                           const ProposalParams& proposal, int N, uint64_t seed,
                           const EstimatorOptions& opt = {});

/// Cross-entropy adaptive importance sampling: M stages of propose / rank /
/// refit-to-elites, final stage scored as an IS estimate.
Estimate ce_estimate(const Scenario& scenario, const Formula& formula, int N_m, int M,
                     double elite_frac, uint64_t seed, const EstimatorOptions& opt = {});

}  // namespace stlsplit
