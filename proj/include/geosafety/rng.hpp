#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace geosafety {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// xoshiro256** generator with splittable, platform-independent seeding.
///
/// Substream derivation: for (seed, stream) the SplitMix64 sequence starts at
/// s0 = mix64(seed ^ mix64(stream + 0x9E3779B97F4A7C15)); the four state words
/// are its first four outputs. Every distribution below is implemented here
/// (no <random> distributions), so draws are identical on every platform.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return next(); }
  std::uint64_t next() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform integer in [0, n), unbiased (Lemire). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;
  /// Standard normal (Marsaglia polar method).
  double normal() noexcept;
  /// Poisson count by summing unit exponential inter-arrival times.
  std::uint64_t poisson(double mean) noexcept;

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace geosafety
