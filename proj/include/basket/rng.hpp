#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <string_view>
#include <vector>

namespace basket {

// Seed derivation: mixes a base seed with a stage label (and optional salt)
// so every pipeline stage gets an independent, reproducible stream.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                                 std::uint64_t salt = 0) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the label
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return mix_seed(seed ^ mix_seed(h) ^ mix_seed(salt * 0x9e3779b97f4a7c15ull));
}

using Rng = std::mt19937_64;

// Unbiased integer in [0, bound). Hand-rolled so results do not depend on
// the standard library's distribution implementation.
inline std::uint64_t uniform_u64(Rng& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

inline std::uint64_t uniform_range(Rng& rng, std::uint64_t lo, std::uint64_t hi) {
  return lo + uniform_u64(rng, hi - lo + 1);  // inclusive bounds
}

// Uniform in [0, 1) with 53 random bits.
inline double uniform_real01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_real01(rng);
}

inline bool bernoulli(Rng& rng, double p) { return uniform_real01(rng) < p; }

// Box-Muller; stateless, discards the second variate.
inline double gaussian(Rng& rng) {
  double u1 = uniform_real01(rng);
  while (u1 <= 0.0) u1 = uniform_real01(rng);
  const double u2 = uniform_real01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <typename T>
void fisher_yates_shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_u64(rng, i)]);
  }
}

}  // namespace basket
