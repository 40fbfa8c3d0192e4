#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sbcp {

// std::mt19937_64 is pinned by the standard; the std distributions are not, so
// every draw goes through the helpers below to stay bit-identical across
// standard libraries.
using Rng = std::mt19937_64;

/// Uniform double in the open interval (0,1), 53 bits of resolution.
inline double uniform_open01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Unbiased index in [0, n) by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

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

/// Run seed = splitmix chain over (base seed, policy id, grid label, run index).
inline std::uint64_t derive_run_seed(std::uint64_t base_seed, std::string_view policy_id,
                                     std::string_view grid_label, std::uint64_t run_index) {
  std::uint64_t h = splitmix64(base_seed);
  h = splitmix64(h ^ fnv1a64(policy_id));
  h = splitmix64(h ^ fnv1a64(grid_label));
  h = splitmix64(h ^ run_index);
  return h;
}

}  // namespace sbcp
