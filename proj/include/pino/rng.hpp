#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace pino {

// SplitMix64 (Steele, Lea & Flood, "Fast splittable pseudorandom number
// generators", OOPSLA 2014): the state advances by the 64-bit golden-gamma
// constant and outputs pass through a two-round mixing finalizer.  Chosen
// because it is a small, fully specified algorithm: identical seeds give
// identical streams on any platform, independent of the standard library's
// engines and distributions.  Streams for independent work items are derived
// by hashing (seed, path...) so dataset generation and training never depend
// on iteration interleaving.

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// Derive a child seed from a root seed and a path of indices.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = seed;
  for (std::uint64_t p : path) s = mix64(s ^ ((p + 1) * kGoldenGamma));
  return s;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (no caching: two uniforms per draw).
  double normal() {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Independent child stream for the given path.
  Rng child(std::initializer_list<std::uint64_t> path) const {
    return Rng(derive_seed(state_, path));
  }

 private:
  std::uint64_t state_;
};

// Stream tags keep derived seeds for unrelated purposes disjoint.
namespace stream {
constexpr std::uint64_t kDomain = 1;
constexpr std::uint64_t kBoundary = 2;
constexpr std::uint64_t kGp = 3;
constexpr std::uint64_t kInterior = 4;
constexpr std::uint64_t kEvalPoints = 5;
constexpr std::uint64_t kOracle = 6;
constexpr std::uint64_t kInit = 7;
constexpr std::uint64_t kShuffle = 8;
constexpr std::uint64_t kSubsample = 9;
constexpr std::uint64_t kSplit = 10;
constexpr std::uint64_t kFixedBc = 11;
}  // namespace stream

}  // namespace pino
