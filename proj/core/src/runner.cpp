#include "stlsplit/runner.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace stlsplit {

namespace {

void check_finite(const std::vector<double>& state, int t) {
  for (double v : state) {
    if (std::isnan(v)) {
      throw std::runtime_error("simulator produced NaN state at timestep " +
                               std::to_string(t));
    }
  }
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  return a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

uint64_t SimulatorSnapshot::compute_checksum(const std::vector<double>& blob,
                                             const std::vector<double>& state) {
  // FNV-1a over the raw bytes.
  uint64_t h = 0xcbf29ce484222325ULL;
  auto fold = [&h](const std::vector<double>& v) {
    const unsigned char* p = reinterpret_cast<const unsigned char*>(v.data());
    for (size_t i = 0; i < v.size() * sizeof(double); ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  fold(blob);
  fold(state);
  return h;
}

void SimulatorSnapshot::seal() { checksum = compute_checksum(blob, state); }

bool SimulatorSnapshot::valid() const {
  return version == kVersion && checksum == compute_checksum(blob, state);
}

int TrajectoryRun::first_level_below(double gamma) const {
  for (size_t t = 0; t < levels.size(); ++t) {
    if (levels[t] < gamma) return static_cast<int>(t);
  }
  return -1;
}

const SimulatorSnapshot* TrajectoryRun::snapshot_at(int t) const {
  for (const auto& s : snapshots) {
    if (s.timestep == t) return &s;
  }
  return nullptr;
}

namespace {

const SimulatorSnapshot* nearest_snapshot_at_or_before(const TrajectoryRun& run, int t) {
  const SimulatorSnapshot* best = nullptr;
  for (const auto& s : run.snapshots) {
    if (s.timestep <= t && (!best || s.timestep > best->timestep)) best = &s;
  }
  return best;
}

void take_snapshot(TrajectoryRun& run, const Simulator& sim) {
  SimulatorSnapshot snap = sim.snapshot();
  snap.seal();
  run.snapshots.push_back(std::move(snap));
}

void advance(TrajectoryRun& run, Simulator& sim, NoiseStream& stream, WorkList& wl, int T) {
  const int t = sim.timestep();
  run.rng_at_step.emplace_back(stream.stream_id(), stream.counter());
  StepResult r = sim.step(stream);
  std::vector<double> x = sim.current_state();
  check_finite(x, t + 1);
  run.traj.actions.push_back(std::move(r.action));
  run.noise_log.push_back(std::move(r.noise));
  run.step_log_weights.push_back(r.log_weight);
  run.log_weight += r.log_weight;
  wl.ingest(x);
  run.levels.push_back(wl.robustness());
  run.traj.states.push_back(std::move(x));
  run.steps_simulated += 1;
  if (sim.timestep() % run.snapshot_stride == 0 || sim.timestep() == T) {
    take_snapshot(run, sim);
  }
}

}  // namespace

TrajectoryRun run_trajectory(const Scenario& scenario, Simulator& sim, int T,
                             NoiseStream stream, const Formula& formula,
                             int snapshot_stride) {
  if (sim.timestep() != 0) throw std::logic_error("run_trajectory needs a fresh simulator");
  TrajectoryRun run;
  run.snapshot_stride = snapshot_stride;
  run.traj.dt = scenario.dt();
  run.traj.seed_lineage.emplace_back(0, stream.stream_id());

  WorkList wl(formula, scenario.predicates(), T);
  std::vector<double> x0 = sim.current_state();
  check_finite(x0, 0);
  wl.ingest(x0);
  run.levels.push_back(wl.robustness());
  run.traj.states.push_back(std::move(x0));
  take_snapshot(run, sim);

  for (int t = 0; t < T; ++t) advance(run, sim, stream, wl, T);
  // Pair the final state with a repeat of the last action.
  run.traj.actions.push_back(run.traj.actions.empty() ? std::vector<double>{}
                                                      : run.traj.actions.back());
  return run;
}

TrajectoryRun resume_trajectory(const Scenario& scenario, const TrajectoryRun& source,
                                int t_splice, Simulator& sim, int T, NoiseStream stream,
                                const Formula& formula) {
  if (t_splice < 0 || t_splice > T) throw std::out_of_range("t_splice out of range");

  TrajectoryRun run;
  run.snapshot_stride = source.snapshot_stride;
  run.traj.dt = source.traj.dt;
  run.traj.seed_lineage = source.traj.seed_lineage;
  run.traj.seed_lineage.emplace_back(t_splice, stream.stream_id());

  // Copy the shared prefix bitwise.
  run.traj.states.assign(source.traj.states.begin(),
                         source.traj.states.begin() + t_splice + 1);
  run.traj.actions.assign(source.traj.actions.begin(),
                          source.traj.actions.begin() + t_splice);
  run.levels.assign(source.levels.begin(), source.levels.begin() + t_splice + 1);
  run.noise_log.assign(source.noise_log.begin(), source.noise_log.begin() + t_splice);
  run.step_log_weights.assign(source.step_log_weights.begin(),
                              source.step_log_weights.begin() + t_splice);
  run.rng_at_step.assign(source.rng_at_step.begin(), source.rng_at_step.begin() + t_splice);
  for (const auto& s : source.snapshots) {
    if (s.timestep <= t_splice) run.snapshots.push_back(s);
  }
  for (double w : run.step_log_weights) run.log_weight += w;

  if (t_splice == T) {
    // Empty continuation.
    run.traj.actions.push_back(source.traj.actions.back());
    return run;
  }

  // Restore from the nearest snapshot, replaying deterministically forward
  // if the stride skipped the exact splice step.
  const SimulatorSnapshot* snap = nearest_snapshot_at_or_before(source, t_splice);
  if (!snap) throw std::runtime_error("no snapshot at or before splice point");
  if (!snap->valid() ||
      !bitwise_equal(snap->state, source.traj.states[static_cast<size_t>(snap->timestep)])) {
    throw std::runtime_error("snapshot/prefix mismatch (checksum)");
  }
  sim.restore(*snap);
  for (int t = snap->timestep; t < t_splice; ++t) {
    const auto [sid, counter] = source.rng_at_step[static_cast<size_t>(t)];
    NoiseStream replay(stream.master_seed(), sid);
    replay.set_counter(counter);
    sim.step(replay);
  }
  if (!bitwise_equal(sim.current_state(), source.traj.states[static_cast<size_t>(t_splice)])) {
    throw std::runtime_error("snapshot/prefix mismatch (replay divergence)");
  }

  // Rebuild the work-list over the prefix; ingest is deterministic, so the
  // cached levels match the source's bitwise.
  WorkList wl(formula, scenario.predicates(), T);
  for (int t = 0; t <= t_splice; ++t) wl.ingest(run.traj.states[static_cast<size_t>(t)]);

  for (int t = t_splice; t < T; ++t) advance(run, sim, stream, wl, T);
  run.traj.actions.push_back(run.traj.actions.back());
  return run;
}

}  // namespace stlsplit
