#pragma once

#include <cstdint>
#include <vector>

namespace bam {

/// Purpose streams. Every consumer derives its own generator from
/// (seed, stream, index) so reordering one consumer never disturbs another.
enum class Stream : std::uint64_t {
  Data = 1,       // dataset synthesis, epoch shuffles
  Augment = 2,    // view sampling
  Init = 3,       // parameter init
  Optimizer = 4,  // anything stochastic in the optimizer
  Eval = 5,       // k-means restarts, probe init
};

/// Deterministic 64-bit generator: splitmix64 (Vigna's public-domain
/// finalizer, golden-ratio increment). Seed expansion and stream derivation
/// reuse the same mixer, so reruns are bit-identical and the algorithm is
/// simple enough to port exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t state) : state_(state) {}

  /// Independent generator for (seed, stream, index). Used for per-purpose,
  /// per-step, and per-view streams.
  static Rng derive(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
    std::uint64_t s = mix(seed + kGamma);
    s = mix(s ^ (static_cast<std::uint64_t>(stream) * kMul1));
    s = mix(s ^ (index * kMul2));
    return Rng(s);
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  /// Uniform double in [0, 1), 53 mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  /// Standard normal via Box-Muller; always consumes exactly two draws.
  double normal();

  /// Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n);

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;
  static constexpr std::uint64_t kMul1 = 0xbf58476d1ce4e5b9ull;
  static constexpr std::uint64_t kMul2 = 0x94d049bb133111ebull;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * kMul1;
    z = (z ^ (z >> 27)) * kMul2;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace bam
