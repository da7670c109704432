#pragma once

#include <array>
#include <cstdint>

namespace dln {

/// xoshiro256** (Blackman & Vigna), state expanded from a 64-bit seed with
/// splitmix64. Output is identical on every platform, unlike the std
/// distributions, so seeded reports are reproducible byte for byte.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream for restart `index` of experiment `seed`.
  static Rng stream(std::uint64_t seed, std::uint64_t index) { return Rng(seed ^ index); }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (no cached second draw).
  double normal();
  std::uint64_t below(std::uint64_t n);

 private:
  std::array<std::uint64_t, 4> s_;
};

}  // namespace dln
