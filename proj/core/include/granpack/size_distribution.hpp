#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "granpack/geometry.hpp"
#include "granpack/rng.hpp"

namespace granpack {

/// Log-normal radius distribution truncated to [r_min, r_max].
/// `sigma` is the spread of ln r; `r0` is the median radius.
struct SizeDistribution {
  double r0 = 1.0;
  double sigma = 0.25;
  double r_min = 0.2;
  double r_max = 2.5;

  void validate() const;
};

// Untruncated log-normal density (1 / (sqrt(2 pi) sigma r)) exp(-(ln r - ln r0)^2 / (2 sigma^2)).
double lognormal_density(const SizeDistribution& d, double r);

/// Truncated distribution with an inverse-CDF sampler built on a 4096-interval
/// monotone cubic Hermite table of the quadrature CDF in standardised log
/// space.
class TruncatedLogNormal {
 public:
  static constexpr int kTableIntervals = 4096;

  explicit TruncatedLogNormal(const SizeDistribution& d);

  const SizeDistribution& params() const noexcept { return d_; }
  // Renormalised density; zero outside [r_min, r_max]. Throws for r <= 0.
  double pdf(double r) const;
  double cdf(double r) const;
  double quantile(double u) const;
  double sample(SplitMix64& rng) const { return quantile(rng.uniform()); }
  // Untruncated probability mass inside [r_min, r_max].
  double normalization() const noexcept { return mass_; }

 private:
  double to_z(double r) const;
  double hermite(int k, double t) const;

  SizeDistribution d_;
  double z_lo_ = 0.0;
  double z_hi_ = 0.0;
  double h_ = 0.0;
  double mass_ = 1.0;
  std::vector<double> cdf_;    // node values, cdf_.front() = 0, cdf_.back() = 1
  std::vector<double> slope_;  // limited node derivatives dF/dz
};

// Convenience wrapper around TruncatedLogNormal::pdf.
double pdf(const SizeDistribution& d, double r);
double sample_radius(const TruncatedLogNormal& dist, SplitMix64& rng);

enum class FamilyKind : std::uint32_t { Sphere = 0, Prolate = 1, Oblate = 2, Carrot = 3, HalfDome = 4 };

const char* to_string(FamilyKind kind);
FamilyKind family_from_string(const std::string& name);

/// Secondary-to-major semi-length ratios of a named shape family, ordered
/// (a+, a-, b+, b-, c+, c-). The largest ratio is 1 so the major semi-length
/// equals the sampled radius.
struct ShapeFamily {
  FamilyKind kind = FamilyKind::Sphere;
  std::array<double, 6> ratios{1, 1, 1, 1, 1, 1};

  static ShapeFamily defaults(FamilyKind kind);
  void validate() const;
  ParticleShape make(double r) const;
};

struct AssemblySpec {
  std::size_t n = 1;
  ShapeFamily family;
  SizeDistribution distribution;
  double density = 2650.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// n particles with sampled major semi-lengths, at the origin with identity
// orientation. Ids are 0..n-1. Deterministic in the spec.
std::vector<Particle> build_assembly(const AssemblySpec& spec);

struct HistogramRow {
  double bin_center = 0.0;
  double empirical = 0.0;
  double analytic = 0.0;
};

// Normalised histogram of major semi-lengths over [r_min, r_max] next to the
// analytic truncated density at each bin centre.
std::vector<HistogramRow> histogram_report(std::span<const Particle> assembly, const SizeDistribution& d,
                                           int bins);

}  // namespace granpack
