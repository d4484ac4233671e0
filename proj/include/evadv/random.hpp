#pragma once

#include <cstdint>
#include <random>

namespace evadv {

using Rng = std::mt19937_64;

// Draw helpers below avoid std::*_distribution so that sequences are identical
// across standard library implementations.

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform in (0, 1].
inline double uniform_open_closed(Rng& rng) { return 1.0 - uniform01(rng); }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Uniform index in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for item `index` of a run seeded with `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

template <typename Container>
void shuffle_in_place(Container& c, Rng& rng) {
  for (std::size_t i = c.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(c[i - 1], c[j]);
  }
}

}  // namespace evadv
