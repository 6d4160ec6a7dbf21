#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace vfiq {

/// SplitMix64 (Steele, Lea, Flood 2014). One 64-bit state word; the three
/// constants below are the published ones, so sequences are reproducible in
/// any language with 64-bit unsigned wrap-around arithmetic.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Integer in [0, bound) by plain modulo reduction. bound must be > 0.
  std::uint64_t below(std::uint64_t bound) { return next() % bound; }

  /// Standard normal via Box-Muller (one draw per call, cosine branch).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace vfiq
