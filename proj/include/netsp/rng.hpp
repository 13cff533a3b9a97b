#pragma once

#include <cstdint>

namespace netsp {

/// SplitMix64 finalizer applied to a Weyl counter: the k-th draw of a stream
/// seeded with `seed` is mix(seed + (k + 1) * 0x9E3779B97F4A7C15). Being
/// counter-based, any draw can be recomputed from (seed, k) alone, which is
/// what makes generated datasets reproducible across implementations.
class Rng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit Rng(std::uint64_t seed, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t at(std::uint64_t seed, std::uint64_t k) {
    return mix(seed + (k + 1) * kGamma);
  }

  std::uint64_t next_u64() { return at(seed_, counter_++); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound), bound > 0 (multiply-shift reduction).
  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace netsp
