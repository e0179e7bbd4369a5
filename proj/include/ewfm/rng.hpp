#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace ewfm {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent seed for item `index` of stream `stream` under a run seed. Used
/// so per-sample randomness does not depend on evaluation order.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) noexcept {
  return mix64(mix64(mix64(base) ^ stream) + index);
}

namespace streams {
inline constexpr std::uint64_t kInit = 0x11;
inline constexpr std::uint64_t kInitialBuffer = 0x12;
inline constexpr std::uint64_t kModelBuffer = 0x13;
inline constexpr std::uint64_t kTrainLoop = 0x14;
inline constexpr std::uint64_t kSampling = 0x15;
inline constexpr std::uint64_t kLikelihood = 0x16;
inline constexpr std::uint64_t kOracle = 0x17;
inline constexpr std::uint64_t kLayout = 0x18;
}  // namespace streams

inline void fill_standard_normal(Rng& rng, std::span<double> out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out) v = normal(rng);
}

inline void fill_rademacher(Rng& rng, std::span<double> out) {
  std::uint64_t bits = 0;
  int left = 0;
  for (double& v : out) {
    if (left == 0) {
      bits = rng();
      left = 64;
    }
    v = (bits & 1U) ? 1.0 : -1.0;
    bits >>= 1;
    --left;
  }
}

}  // namespace ewfm
