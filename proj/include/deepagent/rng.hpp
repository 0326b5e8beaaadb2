#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace deepagent {

/// Seeded random source. Draws are derived from std::mt19937_64 with explicit
/// integer-to-real conversions, so a seed yields the same sequence on every
/// platform (the std distributions are implementation defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 42) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling on the top of the range keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r = engine_();
    while (r >= limit) r = engine_();
    return r % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates with our own index draw; std::shuffle is not portable.
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Independent stream for a numbered sub-task (tree, sample, fold...).
  Rng derive(std::uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream + 0x9E3779B97F4A7C15ULL))); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace deepagent
