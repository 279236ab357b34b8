#pragma once

#include <cstdint>
#include <random>

namespace tweezer {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent sub-stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for sub-stream `index` of `master`. Stable across thread counts.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix_seed(mix_seed(master) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t master, std::uint64_t index) {
  return Rng(derive_seed(master, index));
}

/// Uniform double in [0, 1) using the top 53 bits; independent of the
/// standard library's generate_canonical implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace tweezer
