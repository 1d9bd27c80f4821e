#pragma once

#include <span>
#include <vector>

namespace stlsplit {

/// Lemire monotonic-deque sliding minimum: out[i] = min(data[i .. i+width-1]),
/// windows clipped to the end of the buffer. Amortized O(1) per element.
/// Ties keep the earlier index.
std::vector<double> sliding_window_min(std::span<const double> data, int width);
std::vector<double> sliding_window_max(std::span<const double> data, int width);

/// Windowed extremum with explicit per-index offsets, used by the work-list:
///   out[i] = extremum of data[j] for j in [i+lo, min(i+hi, last)],
/// for i in [begin, end]; empty windows yield +inf (min) / -inf (max).
/// hi < 0 means unbounded (window runs to `last`).
void windowed_min_into(std::span<const double> data, int lo, int hi, int begin, int end,
                       std::vector<double>& out);
void windowed_max_into(std::span<const double> data, int lo, int hi, int begin, int end,
                       std::vector<double>& out);

/// Backward-looking variant for past operators:
///   out[i] = extremum of data[j] for j in [max(0, i-hi), i-lo]
/// (hi < 0 means unbounded: window starts at 0).
void windowed_min_past_into(std::span<const double> data, int lo, int hi, int begin, int end,
                            std::vector<double>& out);
void windowed_max_past_into(std::span<const double> data, int lo, int hi, int begin, int end,
                            std::vector<double>& out);

}  // namespace stlsplit
