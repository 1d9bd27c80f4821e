#pragma once

// Test-only oracles and generators, kept independent of the library's
// incremental implementation paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "stlsplit/formula.hpp"
#include "stlsplit/predicate.hpp"

namespace stlsplit::testing {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Equality up to 1e-9, treating equal infinities as equal (doctest's Approx
/// rejects inf == inf).
inline bool close(double a, double b, double tol = 1e-9) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= tol;
}

/// Naive O(n*w) sliding-window oracle: out[i] = min over [i, min(i+w-1, n-1)].
inline std::vector<double> naive_window_min(const std::vector<double>& data, int width) {
  std::vector<double> out(data.size());
  const int n = static_cast<int>(data.size());
  for (int i = 0; i < n; ++i) {
    double m = kInf;
    for (int j = i; j < std::min(n, i + width); ++j) m = std::min(m, data[j]);
    out[i] = m;
  }
  return out;
}

inline std::vector<double> naive_window_max(const std::vector<double>& data, int width) {
  std::vector<double> out(data.size());
  const int n = static_cast<int>(data.size());
  for (int i = 0; i < n; ++i) {
    double m = -kInf;
    for (int j = i; j < std::min(n, i + width); ++j) m = std::max(m, data[j]);
    out[i] = m;
  }
  return out;
}

/// Independent boolean STL semantics over the prefix tau_[0:t]. Predicates
/// hold when the margin is strictly positive, so the verdict agrees with the
/// robustness sign whenever robustness is nonzero.
inline bool boolean_stl(const Formula& f, int id, const PredicateTable& preds,
                        const std::vector<std::vector<double>>& states, int i, int t) {
  const FormulaNode& n = f.node(id);
  switch (n.kind) {
    case NodeKind::True:
      return true;
    case NodeKind::Pred:
      return preds.at(n.pred)(states[static_cast<size_t>(i)]) > 0.0;
    case NodeKind::Not:
      return !boolean_stl(f, n.child0, preds, states, i, t);
    case NodeKind::And:
      return boolean_stl(f, n.child0, preds, states, i, t) &&
             boolean_stl(f, n.child1, preds, states, i, t);
    case NodeKind::Or:
      return boolean_stl(f, n.child0, preds, states, i, t) ||
             boolean_stl(f, n.child1, preds, states, i, t);
    case NodeKind::Implies:
      return !boolean_stl(f, n.child0, preds, states, i, t) ||
             boolean_stl(f, n.child1, preds, states, i, t);
    case NodeKind::Always: {
      const int hi = n.interval.unbounded() ? t : std::min(t, i + n.interval.hi);
      for (int j = std::max(0, i + n.interval.lo); j <= hi; ++j) {
        if (!boolean_stl(f, n.child0, preds, states, j, t)) return false;
      }
      return true;
    }
    case NodeKind::Eventually: {
      const int hi = n.interval.unbounded() ? t : std::min(t, i + n.interval.hi);
      for (int j = std::max(0, i + n.interval.lo); j <= hi; ++j) {
        if (boolean_stl(f, n.child0, preds, states, j, t)) return true;
      }
      return false;
    }
    case NodeKind::Historically: {
      const int lo = n.interval.unbounded() ? 0 : std::max(0, i - n.interval.hi);
      for (int j = lo; j <= std::min(t, i - n.interval.lo); ++j) {
        if (!boolean_stl(f, n.child0, preds, states, j, t)) return false;
      }
      return true;
    }
    case NodeKind::Once: {
      const int lo = n.interval.unbounded() ? 0 : std::max(0, i - n.interval.hi);
      for (int j = lo; j <= std::min(t, i - n.interval.lo); ++j) {
        if (boolean_stl(f, n.child0, preds, states, j, t)) return true;
      }
      return false;
    }
    case NodeKind::Until: {
      const int hi = n.interval.unbounded() ? t : std::min(t, i + n.interval.hi);
      for (int i2 = std::max(0, i + n.interval.lo); i2 <= hi; ++i2) {
        if (!boolean_stl(f, n.child1, preds, states, i2, t)) continue;
        bool left_ok = true;
        for (int i1 = i; i1 <= i2 && left_ok; ++i1) {
          left_ok = boolean_stl(f, n.child0, preds, states, i1, t);
        }
        if (left_ok) return true;
      }
      return false;
    }
  }
  return false;
}

inline bool boolean_stl(const Formula& f, const PredicateTable& preds,
                        const std::vector<std::vector<double>>& states, int i, int t) {
  return boolean_stl(f, f.root(), preds, states, i, t);
}

/// Scalar-signal predicate table: p = x[0], q = -x[0] + 0.5, r = x[1].
inline std::shared_ptr<const PredicateTable> scalar_preds() {
  auto table = std::make_shared<PredicateTable>();
  (*table)["p"] = [](std::span<const double> x) { return x[0]; };
  (*table)["q"] = [](std::span<const double> x) { return 0.5 - x[0]; };
  (*table)["r"] = [](std::span<const double> x) { return x[1]; };
  return table;
}

/// Random formula over predicates {p, q, r}, all operator kinds, depth-bounded.
inline Formula random_formula(std::mt19937& rng, int max_depth) {
  std::uniform_int_distribution<int> pick_leaf(0, 2);
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
    return Formula::pred(names[pick_leaf(rng)]);
  }
  std::uniform_int_distribution<int> pick(0, 10);
  switch (pick(rng)) {
    case 0:
      return random_formula(rng, 0);
    case 1:
      return Formula::negate(random_formula(rng, max_depth - 1));
    case 2:
      return Formula::conj(random_formula(rng, max_depth - 1),
                           random_formula(rng, max_depth - 1));
    case 3:
      return Formula::disj(random_formula(rng, max_depth - 1),
                           random_formula(rng, max_depth - 1));
    case 4:
      return Formula::implies(random_formula(rng, max_depth - 1),
                              random_formula(rng, max_depth - 1));
    case 5:
      return Formula::always(interval(), random_formula(rng, max_depth - 1));
    case 6:
      return Formula::eventually(interval(), random_formula(rng, max_depth - 1));
    case 7:
      return Formula::until(interval(), random_formula(rng, max_depth - 1),
                            random_formula(rng, max_depth - 1));
    case 8:
      return Formula::historically(interval(), random_formula(rng, max_depth - 1));
    case 9:
      return Formula::once(interval(), random_formula(rng, max_depth - 1));
    default:
      return Formula::top();
  }
}

/// Random 2-d signal trace of the given length.
inline std::vector<std::vector<double>> random_trace(std::mt19937& rng, int length) {
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::vector<double>> states;
  double a = 0.0, b = 0.0;
  for (int t = 0; t < length; ++t) {
    a += 0.3 * noise(rng);
    b += 0.3 * noise(rng);
    states.push_back({a, b});
  }
  return states;
}

}  // namespace stlsplit::testing
