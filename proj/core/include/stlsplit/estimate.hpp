#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace stlsplit {

/// Structured estimator output with full diagnostics.
struct Estimate {
  double p_hat = 0.0;
  std::string method;                   // "mc" | "ams" | "is" | "ce"
  std::vector<double> levels;           // gamma_m per stage (empty for mc/is)
  std::vector<int> discards_per_stage;  // K_m per stage
  long total_simulation_steps = 0;
  int trajectories_run = 0;
  bool extinction = false;
  uint64_t master_seed = 0;
  double wall_time_s = 0.0;

  // Method-specific diagnostics (not part of the wire schema).
  double std_error = std::numeric_limits<double>::quiet_NaN();
  double effective_sample_size = std::numeric_limits<double>::quiet_NaN();

  /// JSON with the exact wire field names; deterministic except wall_time_s.
  std::string to_json() const;

  /// Level trace CSV: "stage,gamma,discards" header plus one row per stage.
  std::string levels_csv() const;
};

}  // namespace stlsplit
