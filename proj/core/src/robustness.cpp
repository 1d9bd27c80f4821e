#include "stlsplit/robustness.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace stlsplit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double batch_robustness_node(const Formula& f, int node_id, const PredicateTable& preds,
                             const std::vector<std::vector<double>>& states, int i, int t) {
  if (i < 0 || t < i || t >= static_cast<int>(states.size())) {
    throw std::out_of_range("batch_robustness: index out of range");
  }
  const FormulaNode& n = f.node(node_id);
  switch (n.kind) {
    case NodeKind::True:
      return kInf;
    case NodeKind::Pred: {
      const auto it = preds.find(n.pred);
      if (it == preds.end()) throw std::invalid_argument("unbound predicate " + n.pred);
      return it->second(states[static_cast<size_t>(i)]);
    }
    case NodeKind::Not:
      return -batch_robustness_node(f, n.child0, preds, states, i, t);
    case NodeKind::And:
      return std::min(batch_robustness_node(f, n.child0, preds, states, i, t),
                      batch_robustness_node(f, n.child1, preds, states, i, t));
    case NodeKind::Or:
      return std::max(batch_robustness_node(f, n.child0, preds, states, i, t),
                      batch_robustness_node(f, n.child1, preds, states, i, t));
    case NodeKind::Implies:
      return std::max(-batch_robustness_node(f, n.child0, preds, states, i, t),
                      batch_robustness_node(f, n.child1, preds, states, i, t));
    case NodeKind::Always: {
      const int lo = i + n.interval.lo;
      const int hi = n.interval.unbounded() ? t : std::min(t, horizon_add(i, n.interval.hi));
      double acc = kInf;
      for (int j = std::max(0, lo); j <= hi; ++j) {
        acc = std::min(acc, batch_robustness_node(f, n.child0, preds, states, j, t));
      }
      return acc;
    }
    case NodeKind::Eventually: {
      const int lo = i + n.interval.lo;
      const int hi = n.interval.unbounded() ? t : std::min(t, horizon_add(i, n.interval.hi));
      double acc = -kInf;
      for (int j = std::max(0, lo); j <= hi; ++j) {
        acc = std::max(acc, batch_robustness_node(f, n.child0, preds, states, j, t));
      }
      return acc;
    }
    case NodeKind::Historically: {
      const int lo = n.interval.unbounded() ? 0 : std::max(0, i - n.interval.hi);
      const int hi = std::min(t, i - n.interval.lo);
      double acc = kInf;
      for (int j = lo; j <= hi; ++j) {
        acc = std::min(acc, batch_robustness_node(f, n.child0, preds, states, j, t));
      }
      return acc;
    }
    case NodeKind::Once: {
      const int lo = n.interval.unbounded() ? 0 : std::max(0, i - n.interval.hi);
      const int hi = std::min(t, i - n.interval.lo);
      double acc = -kInf;
      for (int j = lo; j <= hi; ++j) {
        acc = std::max(acc, batch_robustness_node(f, n.child0, preds, states, j, t));
      }
      return acc;
    }
    case NodeKind::Until: {
      const int lo = i + n.interval.lo;
      const int hi = n.interval.unbounded() ? t : std::min(t, horizon_add(i, n.interval.hi));
      double best = -kInf;
      for (int i2 = std::max(0, lo); i2 <= hi; ++i2) {
        double left_inf = kInf;
        for (int i1 = i; i1 <= i2; ++i1) {
          left_inf =
              std::min(left_inf, batch_robustness_node(f, n.child0, preds, states, i1, t));
        }
        best = std::max(best,
                        std::min(batch_robustness_node(f, n.child1, preds, states, i2, t),
                                 left_inf));
      }
      return best;
    }
  }
  throw std::logic_error("unreachable");
}

double batch_robustness(const Formula& f, const PredicateTable& preds,
                        const std::vector<std::vector<double>>& states, int i, int t) {
  return batch_robustness_node(f, f.root(), preds, states, i, t);
}

}  // namespace stlsplit
