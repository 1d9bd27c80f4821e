#pragma once

#include <memory>
#include <string>
#include <vector>

#include "stlsplit/formula.hpp"
#include "stlsplit/predicate.hpp"
#include "stlsplit/simulator.hpp"

namespace stlsplit {

struct TrajectoryRun;

/// A scenario bundles everything the estimators need: a simulator factory,
/// the predicate bindings, the named rule formulas, and (for the importance
/// samplers) the proposal family.
class Scenario {
 public:
  virtual ~Scenario() = default;

  virtual int horizon() const = 0;  // T: trajectories have T+1 states
  virtual double dt() const = 0;

  /// Fresh simulator; `proposal` of nullptr (or identity params) samples the
  /// target distribution.
  virtual std::unique_ptr<Simulator> make_simulator(
      const ProposalParams* proposal = nullptr) const = 0;

  virtual std::shared_ptr<const PredicateTable> predicates() const = 0;

  /// Named rule formula, e.g. "phi1".
  virtual Formula rule(const std::string& name) const = 0;
  virtual std::vector<std::string> rule_names() const = 0;

  /// Weighted maximum-likelihood refit of the proposal family to elite
  /// trajectories' noise records (cross-entropy M-step).
  virtual ProposalParams fit_proposal(const std::vector<const TrajectoryRun*>& elites,
                                      const std::vector<double>& weights) const = 0;
};

}  // namespace stlsplit
