#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace radfiner {

using Rng = std::mt19937_64;

/// Stable 64-bit FNV-1a hash; used to derive per-scan seeds from scan ids.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

/// Seeds an engine from an ordered tuple of integers. Independent of
/// execution order, so parallel workers reproduce serial runs exactly.
inline Rng derive_rng(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  return Rng(seq);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double normal(Rng& rng, double mean, double sigma) {
  return std::normal_distribution<double>(mean, sigma)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
  // Draws even for p in {0,1} so the stream position does not depend on p.
  return uniform(rng, 0.0, 1.0) < p;
}

}  // namespace radfiner
