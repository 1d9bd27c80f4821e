#include "stlsplit/sliding_window.hpp"

#include <deque>
#include <limits>

namespace stlsplit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// Generic forward pass. Window for output index i covers data indices
// [i+lo, min(i+hi, last)] (hi < 0: unbounded). cmp(a, b) returns true when a
// should displace b at the deque back; strict comparison keeps earlier ties.
template <typename Cmp>
void windowed_extreme(std::span<const double> data, int lo, int hi, int begin, int end,
                      std::vector<double>& out, double empty_value, Cmp better) {
  const int last = static_cast<int>(data.size()) - 1;
  if (static_cast<int>(out.size()) < end + 1) out.resize(static_cast<size_t>(end) + 1);
  std::deque<int> dq;  // indices into data, extremum at front
  int next = std::max(0, begin + lo);  // next data index to push
  for (int i = begin; i <= end; ++i) {
    const int w_lo = i + lo;
    const int w_hi = (hi < 0) ? last : std::min(last, i + hi);
    if (w_lo > w_hi || w_lo > last) {
      out[static_cast<size_t>(i)] = empty_value;
      continue;
    }
    while (next <= w_hi) {
      while (!dq.empty() && better(data[static_cast<size_t>(next)],
                                   data[static_cast<size_t>(dq.back())])) {
        dq.pop_back();
      }
      dq.push_back(next);
      ++next;
    }
    while (!dq.empty() && dq.front() < w_lo) dq.pop_front();
    out[static_cast<size_t>(i)] = dq.empty() ? empty_value : data[static_cast<size_t>(dq.front())];
  }
}

// Backward-looking pass: window for i is [max(0, i-hi), i-lo] (hi < 0:
// window starts at 0).
template <typename Cmp>
void windowed_extreme_past(std::span<const double> data, int lo, int hi, int begin, int end,
                           std::vector<double>& out, double empty_value, Cmp better) {
  const int last = static_cast<int>(data.size()) - 1;
  if (static_cast<int>(out.size()) < end + 1) out.resize(static_cast<size_t>(end) + 1);
  std::deque<int> dq;
  int first_lo = (hi < 0) ? 0 : std::max(0, begin - hi);
  int next = first_lo;
  for (int i = begin; i <= end; ++i) {
    const int w_lo = (hi < 0) ? 0 : std::max(0, i - hi);
    const int w_hi = std::min(last, i - lo);
    if (w_hi < w_lo || w_hi < 0) {
      out[static_cast<size_t>(i)] = empty_value;
      continue;
    }
    while (next <= w_hi) {
      while (!dq.empty() && better(data[static_cast<size_t>(next)],
                                   data[static_cast<size_t>(dq.back())])) {
        dq.pop_back();
      }
      dq.push_back(next);
      ++next;
    }
    while (!dq.empty() && dq.front() < w_lo) dq.pop_front();
    out[static_cast<size_t>(i)] = dq.empty() ? empty_value : data[static_cast<size_t>(dq.front())];
  }
}

constexpr auto less = [](double a, double b) { return a < b; };
constexpr auto greater = [](double a, double b) { return a > b; };

}  // namespace

std::vector<double> sliding_window_min(std::span<const double> data, int width) {
  std::vector<double> out;
  if (data.empty()) return out;
  windowed_min_into(data, 0, width - 1, 0, static_cast<int>(data.size()) - 1, out);
  return out;
}

std::vector<double> sliding_window_max(std::span<const double> data, int width) {
  std::vector<double> out;
  if (data.empty()) return out;
  windowed_max_into(data, 0, width - 1, 0, static_cast<int>(data.size()) - 1, out);
  return out;
}

void windowed_min_into(std::span<const double> data, int lo, int hi, int begin, int end,
                       std::vector<double>& out) {
  windowed_extreme(data, lo, hi, begin, end, out, kInf, less);
}

void windowed_max_into(std::span<const double> data, int lo, int hi, int begin, int end,
                       std::vector<double>& out) {
  windowed_extreme(data, lo, hi, begin, end, out, -kInf, greater);
}

void windowed_min_past_into(std::span<const double> data, int lo, int hi, int begin, int end,
                            std::vector<double>& out) {
  windowed_extreme_past(data, lo, hi, begin, end, out, kInf, less);
}

void windowed_max_past_into(std::span<const double> data, int lo, int hi, int begin, int end,
                            std::vector<double>& out) {
  windowed_extreme_past(data, lo, hi, begin, end, out, -kInf, greater);
}

}  // namespace stlsplit
