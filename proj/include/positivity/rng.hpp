#pragma once

#include <cstdint>
#include <random>

namespace positivity {

// Deterministic randomness contract, identical across platforms:
//   * engine: std::mt19937_64 (its output sequence is fixed by the standard)
//   * uniform doubles: top 53 bits of one engine output, never
//     std::uniform_real_distribution (whose output is implementation-defined)
//   * bounded integers: 128-bit multiply-shift of one engine output
//   * independent streams (bootstrap replicates, forest trees, simulation
//     replicates) are seeded with derive_seed(master, stream_index), a
//     splitmix64-style mix, so stream creation is order-independent.

inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64_mix(master + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1).
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Multiply-shift bounding; the O(n/2^64)
  /// modulo bias is irrelevant at the sample sizes used here.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace positivity
