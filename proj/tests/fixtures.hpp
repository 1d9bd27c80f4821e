#pragma once

// Brute-force Monte-Carlo reference values for the toy barrier walk
// (drift 0, sigma 1, T = 40), computed once with 1e7 independent
// trajectories of the same simulator (master seed 424242) and frozen here.

namespace stlsplit::testing::fixtures {

// Rare regime: P(max_t x_t > barrier) ~ 1e-4.
inline constexpr double kRareBarrier = 24.2;
inline constexpr double kRareP = 9.30e-5;
inline constexpr double kRareSe = 3.05e-6;

// Easy regime: failure probability near one half.
inline constexpr double kHalfBarrier = 3.6;
inline constexpr double kHalfP = 0.5096026;
inline constexpr double kHalfSe = 1.58e-4;

}  // namespace stlsplit::testing::fixtures
