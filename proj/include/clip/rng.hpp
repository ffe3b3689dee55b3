#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace clip {

// All randomness flows through these helpers rather than the standard
// distributions, whose output sequences differ across standard library
// implementations. Byte-identical reruns are part of the toolkit contract,
// so every draw here is pinned down to exact integer and IEEE operations.

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Decorrelated seed for a named sub-stream of a user-facing seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(~stream));
}

inline Rng seeded_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(derive_seed(seed, stream));
}

// Stream tags, so one user-facing seed feeds several independent streams.
namespace streams {
constexpr std::uint64_t kModelInit = 1;
constexpr std::uint64_t kPlanShuffle = 2;
constexpr std::uint64_t kAugment = 3;
constexpr std::uint64_t kScorerModel = 4;
constexpr std::uint64_t kScorerShuffle = 5;
// Scene i of a generated dataset uses kSceneBase + i.
constexpr std::uint64_t kSceneBase = 1ull << 32;
}  // namespace streams

// Uniform in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Rng& rng, double lo, double hi) {
  return lo + uniform_unit(rng) * (hi - lo);
}

// Uniform integer in [0, n), n > 0.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  return rng() % n;
}

// Uniform integer in [lo, hi], inclusive.
inline int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform_below(
                  rng, static_cast<std::uint64_t>(hi - lo) + 1));
}

// Box-Muller transform, one draw per call (the cosine branch only, so the
// stream position advances by exactly two engine steps per normal).
inline double normal(Rng& rng, double mean = 0.0, double stddev = 1.0) {
  const double u1 = uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  const double r = std::sqrt(-2.0 * std::log1p(-u1));
  const double theta = 6.283185307179586476925286766559 * u2;
  return mean + stddev * r * std::cos(theta);
}

// Fisher-Yates shuffle with the modulo index draw above.
template <typename T>
void shuffle(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace clip
