#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

namespace stlsplit {

/// Time-indexed (state, action) sequence with fixed timestep. States are the
/// full combined ground-truth vectors the predicates evaluate.
struct Trajectory {
  double dt = 0.1;
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> actions;
  /// (splice-timestep, stream-id) for every resume point, initial run first.
  std::vector<std::pair<int, uint64_t>> seed_lineage;

  int length() const { return static_cast<int>(states.size()); }

  /// First t+1 steps; states are copied bitwise.
  Trajectory prefix(int t) const {
    Trajectory out;
    out.dt = dt;
    out.states.assign(states.begin(), states.begin() + t + 1);
    out.actions.assign(actions.begin(),
                       actions.begin() + static_cast<ptrdiff_t>(std::min(
                                             actions.size(), static_cast<size_t>(t) + 1)));
    out.seed_lineage = seed_lineage;
    return out;
  }
};

}  // namespace stlsplit
