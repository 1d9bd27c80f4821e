#pragma once

#include <cmath>
#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace stlsplit {

/// splitmix64 finalizer.
constexpr uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based noise stream: every draw is a pure function of
/// (master_seed, stream_id, counter), so trajectories can be created in any
/// data-dependent order without perturbing each other's randomness.
class NoiseStream {
 public:
  NoiseStream(uint64_t master_seed, uint64_t stream_id)
      : master_seed_(master_seed),
        stream_id_(stream_id),
        base_(mix64(master_seed ^ mix64(stream_id ^ 0xd1b54a32d192ed03ULL))) {}

  uint64_t master_seed() const { return master_seed_; }
  uint64_t stream_id() const { return stream_id_; }
  uint64_t counter() const { return counter_; }
  void set_counter(uint64_t c) { counter_ = c; }

  /// Uniform draw in (0, 1].
  double uniform() {
    const uint64_t bits = next();
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (always consumes two raw draws).
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  bool bernoulli(double p) { return uniform() <= p; }

  /// Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("below(0)");
    // Desk-scale n; modulo bias is negligible for n << 2^64.
    return next() % n;
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  uint64_t next() { return mix64(base_ + counter_++ * 0x9e3779b97f4a7c15ULL); }

  uint64_t master_seed_;
  uint64_t stream_id_;
  uint64_t base_;
  uint64_t counter_ = 0;
};

/// Hands out fresh stream ids in a deterministic order and asserts that no
/// id is ever consumed by two different trajectory continuations.
class StreamAllocator {
 public:
  explicit StreamAllocator(uint64_t master_seed, uint64_t first_id = 0)
      : master_seed_(master_seed), next_id_(first_id) {}

  NoiseStream fresh() {
    const uint64_t id = next_id_++;
    mark_used(id);
    return NoiseStream(master_seed_, id);
  }

  /// A fixed, named stream (e.g. AMS survivor selection).
  NoiseStream named(uint64_t id) const { return NoiseStream(master_seed_, id); }

  /// Register an externally-chosen id in the reuse registry.
  void claim(uint64_t id) { mark_used(id); }

  uint64_t master_seed() const { return master_seed_; }
  uint64_t next_id() const { return next_id_; }

 private:
  void mark_used(uint64_t id) {
    std::lock_guard<std::mutex> lock(mu_);
    if (!used_.insert(id).second) {
      throw std::logic_error("noise stream id reused: " + std::to_string(id));
    }
  }

  uint64_t master_seed_;
  uint64_t next_id_;
  std::mutex mu_;
  std::unordered_set<uint64_t> used_;
};

}  // namespace stlsplit
