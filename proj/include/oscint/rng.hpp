#pragma once

// Deterministic random streams for experiments.  std::mt19937_64 has a fully
// specified output sequence, but the standard distributions do not, so all
// mapping from raw 64-bit words to samples is done here by hand.  Two runs
// with the same seed produce bit-identical streams on any conforming
// implementation, which is what makes experiment CSVs byte-reproducible.

#include <cstdint>
#include <random>

namespace oscint {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  // +1 or -1 with equal probability.
  double next_sign() { return (engine_() & 1u) ? 1.0 : -1.0; }

  bool next_bool() { return (engine_() & 1u) != 0; }

  // Index in [0, n).  Rejection-free modulo is fine here: n is always tiny
  // compared to 2^64, the bias is far below anything observable.
  std::uint64_t next_index(std::uint64_t n) { return engine_() % n; }

  // Standard normal via Box-Muller on hand-mapped uniforms.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_unit() - 1.0;
      v = 2.0 * next_unit() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  // Derives an independent stream for a sub-task in a reproducible way.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    // SplitMix64 step on seed ^ golden-ratio multiple of the stream id.
    std::uint64_t z = seed ^ (stream * 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace oscint
