#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace stlsplit {

/// Discrete-timestep interval [lo, hi]; hi may be unbounded.
struct Interval {
  static constexpr int kUnbounded = std::numeric_limits<int>::max();

  int lo = 0;
  int hi = kUnbounded;

  constexpr bool unbounded() const { return hi == kUnbounded; }

  static Interval bounded(int lo, int hi) {
    if (lo < 0) throw std::invalid_argument("interval lower bound must be non-negative");
    if (hi < lo) throw std::invalid_argument("interval bounds inverted");
    return Interval{lo, hi};
  }

  static Interval open_ended(int lo) {
    if (lo < 0) throw std::invalid_argument("interval lower bound must be non-negative");
    return Interval{lo, kUnbounded};
  }

  /// Convert an interval expressed in seconds to timesteps; the division
  /// must land exactly on a step boundary.
  static Interval from_seconds(double lo_s, double hi_s, double dt);

  bool operator==(const Interval&) const = default;
  std::string to_string() const;
};

/// Saturating addition for horizons (kUnbounded absorbs).
inline int horizon_add(int a, int b) {
  if (a == Interval::kUnbounded || b == Interval::kUnbounded) return Interval::kUnbounded;
  return a + b;
}

inline int horizon_max(int a, int b) {
  if (a == Interval::kUnbounded || b == Interval::kUnbounded) return Interval::kUnbounded;
  return a > b ? a : b;
}

}  // namespace stlsplit
