#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace padforge {

/// Deterministic pseudo-random generator with a portable bit stream.
///
/// The generator is xoshiro256** seeded through SplitMix64, so the same
/// 64-bit seed produces the same draw sequence on every platform and
/// compiler. Parallel work derives independent sub-streams with split(),
/// which mixes (seed, stream-id) instead of sharing state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  /// Next raw 64-bit draw.
  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double next_unit();

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);

  /// Uniform integer in [0, bound); unbiased via rejection. bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Bernoulli draw with success probability p.
  bool bernoulli(double p);

  /// Independent generator derived from (seed, stream). Streams with
  /// distinct ids do not overlap in practice and are reproducible.
  Rng split(std::uint64_t stream) const;

 private:
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> state_{};
};

/// In-place Fisher-Yates shuffle driven by the given generator.
template <typename T>
void shuffle(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace padforge
