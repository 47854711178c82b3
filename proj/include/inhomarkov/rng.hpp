#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace inhomarkov {

/// Seeded random source with platform-independent draws.
///
/// The standard distributions are implementation-defined, so uniforms,
/// normals and integer draws are computed from raw mt19937_64 output here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();

  /// Uniform integer in [0, n). Rejection sampling, unbiased.
  std::size_t index(std::size_t n);

  /// Draw an index from an unnormalized discrete distribution.
  template <typename Weights>
  std::size_t categorical(const Weights& weights, std::size_t size) {
    double total = 0.0;
    for (std::size_t i = 0; i < size; ++i) total += weights[i];
    double u = uniform() * total;
    for (std::size_t i = 0; i < size; ++i) {
      u -= weights[i];
      if (u < 0.0) return i;
    }
    // Round-off can leave u marginally non-negative; take the last positive cell.
    for (std::size_t i = size; i-- > 0;)
      if (weights[i] > 0.0) return i;
    return size - 1;
  }

  void shuffle(std::vector<std::size_t>& values);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; derives independent sub-seeds from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t offset);

}  // namespace inhomarkov
