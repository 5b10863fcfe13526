#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace hyptree {

/// Engine used throughout the library. mt19937_64 emits an identical stream
/// on every platform, which the deterministic-replay contract relies on.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1). Hand-rolled because std::uniform_real_distribution
/// is not guaranteed to produce the same stream across standard libraries.
inline double next_double(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi).
inline double next_double(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * next_double(rng);
}

/// Uniform integer in [0, n). Uses rejection sampling for portability.
inline std::uint64_t next_index(Rng& rng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// splitmix64 step, used to hash state descriptors into per-call seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Combine a seed with a sequence of integers into one 64-bit hash.
inline std::uint64_t hash_state(std::uint64_t seed, std::span<const int> path) {
  std::uint64_t h = splitmix64(seed);
  for (int v : path) {
    h = splitmix64(h ^ (static_cast<std::uint64_t>(v) + 0x51ed270b7a4fced5ULL));
  }
  return h;
}

}  // namespace hyptree
