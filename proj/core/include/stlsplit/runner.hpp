#pragma once

#include <cstdint>
#include <vector>

#include "stlsplit/formula.hpp"
#include "stlsplit/predicate.hpp"
#include "stlsplit/scenario.hpp"
#include "stlsplit/simulator.hpp"
#include "stlsplit/trajectory.hpp"
#include "stlsplit/worklist.hpp"

namespace stlsplit {

/// A monitored simulation run: the trajectory, the partial-robustness level
/// trace (levels[t] is the robustness of the prefix through x_t), snapshots
/// for later splicing, and bookkeeping for the importance samplers.
struct TrajectoryRun {
  Trajectory traj;
  std::vector<double> levels;
  std::vector<SimulatorSnapshot> snapshots;       // stride-spaced, snapshots[k] at k*stride
  int snapshot_stride = 1;
  std::vector<std::pair<uint64_t, uint64_t>> rng_at_step;  // (stream_id, counter) before step t
  std::vector<std::vector<double>> noise_log;     // per step, scenario-defined layout
  std::vector<double> step_log_weights;           // per step LR increments
  double log_weight = 0.0;
  long steps_simulated = 0;

  double final_level() const { return levels.back(); }

  /// First timestep whose prefix robustness is below `gamma`, or -1.
  int first_level_below(double gamma) const;

  const SimulatorSnapshot* snapshot_at(int t) const;
};

/// Run a fresh monitored trajectory of T steps (T+1 states).
TrajectoryRun run_trajectory(const Scenario& scenario, Simulator& sim, int T,
                             NoiseStream stream, const Formula& formula,
                             int snapshot_stride = 1);

/// Clone `source` through t_splice and re-simulate the remainder with a
/// fresh noise stream. States, actions, levels and noise records on
/// [0, t_splice] are bitwise those of the source. `sim` must be a fresh
/// simulator from the same scenario/proposal; it is restored from the
/// nearest snapshot at or before t_splice (replaying deterministically
/// forward when the stride skipped the exact step).
TrajectoryRun resume_trajectory(const Scenario& scenario, const TrajectoryRun& source,
                                int t_splice, Simulator& sim, int T, NoiseStream stream,
                                const Formula& formula);

}  // namespace stlsplit
