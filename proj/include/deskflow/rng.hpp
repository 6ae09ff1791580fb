#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace deskflow {

/// Seeded random stream. The engine is std::mt19937_64; the distribution
/// transforms are implemented here so draws are identical across standard
/// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream derived from a root seed and a path of indices,
  /// e.g. (seed, sample_index) or (seed, epoch, item).
  static Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer on the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal(double mean, double sigma);
  bool bernoulli(double p);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace deskflow
