#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "granpack/geometry.hpp"

namespace granpack {

/// SplitMix64: counter-based 64-bit generator. Output k is a fixed bijective
/// mix of seed + k * golden-gamma, so streams are reproducible on any
/// platform. This is the generator named "splitmix64" in run configs.
class SplitMix64 {
 public:
  static constexpr const char* kName = "splitmix64";

  explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform random rotation (Shoemake's subgroup algorithm).
  Orientation orientation() noexcept {
    const double u1 = uniform(), u2 = uniform(), u3 = uniform();
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    const double t2 = 2.0 * std::numbers::pi * u2, t3 = 2.0 * std::numbers::pi * u3;
    Orientation q(b * std::cos(t3), a * std::sin(t2), a * std::cos(t2), b * std::sin(t3));
    q.normalize();
    return q;
  }

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

// Derives an independent stream seed from a base seed and a label.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  std::uint64_t z = base ^ (stream * 0xD1B54A32D192ED03ull);
  z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCDull;
  z = (z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53ull;
  return z ^ (z >> 33);
}

}  // namespace granpack
