#pragma once

#include <array>
#include <cstdint>

namespace rydcount {

// SplitMix64 output finalizer (Steele, Lea & Flood). Bijective on 64 bits.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Per-trajectory seed: mix64(master + (index + 1) * golden_gamma).
/// Depends only on (master, index), so streams do not depend on scheduling.
constexpr std::uint64_t derive_trajectory_seed(std::uint64_t master_seed,
                                               std::uint64_t index) noexcept {
  return mix64(master_seed + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

// xoshiro256** 1.0, state expanded from a 64-bit seed with SplitMix64.
// The algorithm is pinned: records are reproducible across platforms and
// language ports, which std::mt19937 + std::*_distribution do not guarantee.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (cosine branch only, two uniforms per
  /// call, no cached spare).
  double normal() noexcept;

 private:
  std::array<std::uint64_t, 4> s_;
};

}  // namespace rydcount
