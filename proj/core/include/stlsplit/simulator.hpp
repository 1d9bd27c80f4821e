#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "stlsplit/rng.hpp"

namespace stlsplit {

/// Opaque serialized simulator state at a timestep. The blob captures the
/// entire closed-loop pipeline (ground truth, tracker, controller memory,
/// scripted schedules) so re-simulation continues the same system.
struct SimulatorSnapshot {
  static constexpr uint32_t kVersion = 1;

  uint32_t version = kVersion;
  int timestep = -1;
  std::vector<double> blob;
  std::vector<double> state;  // combined state at `timestep`, for splice checks
  uint64_t checksum = 0;

  static uint64_t compute_checksum(const std::vector<double>& blob,
                                   const std::vector<double>& state);
  void seal();            // fill checksum
  bool valid() const;     // checksum matches content
};

/// Perception-proposal parameters shared by the importance samplers. The
/// target simulator interprets all-default params as "sample from the target"
/// (likelihood ratio identically 1).
struct ProposalParams {
  /// Probability a detection is forcibly suppressed (Imp-Naive style).
  double miss_rate = 0.0;
  /// Additive shift on the detection logit (cross-entropy family).
  double detect_logit_shift = 0.0;
  /// Mean shift of observation noise, in units of the target sigma.
  std::array<double, 3> noise_mean_shift{0.0, 0.0, 0.0};
  /// Multiplier on the target sigma.
  double noise_sigma_scale = 1.0;

  bool is_identity() const {
    return miss_rate == 0.0 && detect_logit_shift == 0.0 && noise_sigma_scale == 1.0 &&
           noise_mean_shift[0] == 0.0 && noise_mean_shift[1] == 0.0 &&
           noise_mean_shift[2] == 0.0;
  }
};

/// One simulated step: the action applied at the pre-step timestep, the
/// log-likelihood-ratio increment (target over proposal; 0 when sampling the
/// target), and the raw noise record for cross-entropy refitting.
struct StepResult {
  std::vector<double> action;
  double log_weight = 0.0;
  std::vector<double> noise;
};

/// Black-box closed-loop simulator contract required by the splitting
/// estimator: step forward, snapshot, restore. A simulator instance is owned
/// by one trajectory at a time and never shared.
class Simulator {
 public:
  virtual ~Simulator() = default;

  virtual int timestep() const = 0;
  virtual std::vector<double> current_state() const = 0;

  /// Advance one timestep, drawing all stochasticity from `stream`.
  virtual StepResult step(NoiseStream& stream) = 0;

  virtual SimulatorSnapshot snapshot() const = 0;
  virtual void restore(const SimulatorSnapshot& snap) = 0;
};

}  // namespace stlsplit
