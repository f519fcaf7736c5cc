#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace facet {

/// Deterministic pseudorandom stream based on splitmix64.
///
/// Every consumer of randomness in the library draws from one of these,
/// constructed from a user seed and a fixed stream id, so that independent
/// concerns (init, dropout, shuffling, data generation) never interleave
/// and whole runs replay bit-for-bit from a single seed.
class Rng {
 public:
  // Stream ids. Keep stable: they are part of the reproducibility contract.
  static constexpr std::uint64_t kInit = 1;
  static constexpr std::uint64_t kDropout = 2;
  static constexpr std::uint64_t kShuffle = 3;
  static constexpr std::uint64_t kDataGen = 4;

  Rng(std::uint64_t seed, std::uint64_t stream)
      : state_(mix(seed + 0x9e3779b97f4a7c15ULL * (stream + 1))) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform_range(double lo, double hi) {
    return lo + (hi - lo) * uniform();
  }

  /// Standard normal via Box-Muller (hand-rolled so the stream is portable).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Uniform index in [0, n). Rejection sampling, no modulo bias.
  std::size_t uniform_index(std::size_t n) {
    if (n <= 1) return 0;
    std::uint64_t bound = static_cast<std::uint64_t>(n);
    std::uint64_t threshold = (0ULL - bound) % bound;
    for (;;) {
      std::uint64_t x = next_u64();
      if (x >= threshold) return static_cast<std::size_t>(x % bound);
    }
  }

  /// Fisher-Yates shuffle driven by this stream.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace facet
