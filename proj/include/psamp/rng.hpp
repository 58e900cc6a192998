#pragma once

#include <cstdint>
#include <string_view>

namespace psamp {

/// Hash of (seed, consumer label); independent consumers derive their
/// sub-seed through this so their streams never overlap.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

/// Deterministic 64-bit generator (splitmix64). Identical seed gives an
/// identical stream within one build. Single consumer; not thread-safe.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64();

  /// Uniform draw strictly inside (0,1); endpoint draws are clamped to
  /// [2^-53, 1 - 2^-53] so -log(-log(u)) stays finite.
  double uniform_open();

  /// Uniform draw in (-a, a).
  double uniform_symmetric(double a) { return a * (2.0 * uniform_open() - 1.0); }

  /// Integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Independent stream for a named sub-consumer.
  Rng split(std::string_view label) const { return Rng(derive_seed(seed_, label)); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace psamp
