#pragma once

#include <span>
#include <vector>

#include "stlsplit/formula.hpp"
#include "stlsplit/predicate.hpp"

namespace stlsplit {

/// Batch nominal robustness of f over the prefix tau_[0:t], evaluated at
/// index i. Recomputes everything from scratch; this is the reference the
/// incremental monitor is checked against.
///
/// Conventions: inf over an empty index set is +infinity, sup is -infinity.
/// Temporal windows are clipped to [0, t]; past operators use the window
/// [max(0, i - hi), i - lo].
double batch_robustness(const Formula& f, const PredicateTable& preds,
                        const std::vector<std::vector<double>>& states, int i, int t);

/// Same, rooted at an arbitrary subformula node.
double batch_robustness_node(const Formula& f, int node_id, const PredicateTable& preds,
                             const std::vector<std::vector<double>>& states, int i, int t);

}  // namespace stlsplit
