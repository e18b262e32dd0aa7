#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>

namespace dcsr {

/// xoshiro256** seeded through SplitMix64.
///
/// All sampling in the library goes through this generator and the helpers
/// below rather than <random> distributions, whose algorithms differ between
/// standard library implementations. Given the same seed, every platform
/// produces the same draws.
///
/// split(stream) derives an independent child generator from the parent's
/// seed and a stream id without advancing the parent, so per-epoch or
/// per-worker streams stay stable when the number of consumers changes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();

  /// Uniform integer in [0, bound). bound must be > 0. Lemire's
  /// multiply-shift with rejection, so the result is unbiased.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Fisher-Yates shuffle driven by Rng::below.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace dcsr
