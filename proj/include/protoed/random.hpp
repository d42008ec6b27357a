#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace protoed {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Independent stream for (seed, purpose). Used so that e.g. head
// initialisation does not shift when an unrelated draw is added upstream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(seed ^ fnv1a64(purpose)) + index);
}

// Portable uniform integer in [0, n). std::uniform_int_distribution is
// implementation-defined, which would make sampled subsets library-dependent.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

// Box-Muller; again avoids std::normal_distribution for portability.
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <class It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::size_t>(last - first);
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace protoed
