#include "granpack/size_distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "granpack/errors.hpp"

namespace granpack {

void SizeDistribution::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma", "must be > 0");
  if (!(r_min > 0.0)) throw ConfigError("r_min", "must be > 0");
  if (!(r0 > r_min)) throw ConfigError("r0", "must exceed r_min");
  if (!(r_max > r0) || !std::isfinite(r_max)) throw ConfigError("r_max", "must exceed r0");
}

double lognormal_density(const SizeDistribution& d, double r) {
  if (!(r > 0.0)) throw std::domain_error("log-normal density requires r > 0");
  const double z = (std::log(r) - std::log(d.r0)) / d.sigma;
  return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * d.sigma * r);
}

namespace {

double std_normal(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// Five-point Gauss-Legendre rule on [a, b].
double gauss_legendre5(double a, double b) {
  static constexpr double x[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                  0.9061798459386640};
  static constexpr double w[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                  0.2369268850561891, 0.2369268850561891};
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double sum = 0.0;
  for (int i = 0; i < 5; ++i) sum += w[i] * std_normal(mid + half * x[i]);
  return sum * half;
}

constexpr double kZClip = 40.0;

}  // namespace

TruncatedLogNormal::TruncatedLogNormal(const SizeDistribution& d) : d_(d) {
  d_.validate();
  z_lo_ = std::max(to_z(d_.r_min), -kZClip);
  z_hi_ = std::min(to_z(d_.r_max), kZClip);
  if (!(z_hi_ > z_lo_)) throw ConfigError("sigma", "truncation interval carries no probability mass");
  h_ = (z_hi_ - z_lo_) / kTableIntervals;

  cdf_.assign(kTableIntervals + 1, 0.0);
  for (int k = 0; k < kTableIntervals; ++k) {
    const double a = z_lo_ + k * h_;
    cdf_[k + 1] = cdf_[k] + gauss_legendre5(a, a + h_);
  }
  mass_ = cdf_.back();
  for (double& c : cdf_) c /= mass_;
  cdf_.back() = 1.0;

  slope_.resize(kTableIntervals + 1);
  for (int k = 0; k <= kTableIntervals; ++k) slope_[k] = std_normal(z_lo_ + k * h_) / mass_;
  // Fritsch-Carlson limiter keeps every Hermite piece monotone.
  for (int k = 0; k < kTableIntervals; ++k) {
    const double secant = (cdf_[k + 1] - cdf_[k]) / h_;
    if (secant <= 0.0) {
      slope_[k] = slope_[k + 1] = 0.0;
      continue;
    }
    const double alpha = slope_[k] / secant, beta = slope_[k + 1] / secant;
    const double r2 = alpha * alpha + beta * beta;
    if (r2 > 9.0) {
      const double tau = 3.0 / std::sqrt(r2);
      slope_[k] = tau * alpha * secant;
      slope_[k + 1] = tau * beta * secant;
    }
  }
}

double TruncatedLogNormal::to_z(double r) const { return (std::log(r) - std::log(d_.r0)) / d_.sigma; }

double TruncatedLogNormal::hermite(int k, double t) const {
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * cdf_[k] + (t3 - 2 * t2 + t) * h_ * slope_[k] + (-2 * t3 + 3 * t2) * cdf_[k + 1] +
         (t3 - t2) * h_ * slope_[k + 1];
}

double TruncatedLogNormal::pdf(double r) const {
  if (!(r > 0.0)) throw std::domain_error("pdf requires r > 0");
  if (r < d_.r_min || r > d_.r_max) return 0.0;
  return lognormal_density(d_, r) / mass_;
}

double TruncatedLogNormal::cdf(double r) const {
  if (r <= d_.r_min) return 0.0;
  if (r >= d_.r_max) return 1.0;
  const double z = to_z(r);
  if (z <= z_lo_) return 0.0;
  if (z >= z_hi_) return 1.0;
  const int k = std::min(static_cast<int>((z - z_lo_) / h_), kTableIntervals - 1);
  return hermite(k, (z - (z_lo_ + k * h_)) / h_);
}

double TruncatedLogNormal::quantile(double u) const {
  u = std::clamp(u, 0.0, 1.0);
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  int k = static_cast<int>(it - cdf_.begin()) - 1;
  k = std::clamp(k, 0, kTableIntervals - 1);
  // Safeguarded Newton on the monotone cubic piece.
  double lo = 0.0, hi = 1.0, t = 0.5;
  const double span = cdf_[k + 1] - cdf_[k];
  if (span > 0.0) t = std::clamp((u - cdf_[k]) / span, 0.0, 1.0);
  for (int it_count = 0; it_count < 60; ++it_count) {
    const double f = hermite(k, t) - u;
    if (f > 0.0) hi = t; else lo = t;
    const double t2 = t * t;
    const double df = (6 * t2 - 6 * t) * cdf_[k] + (3 * t2 - 4 * t + 1) * h_ * slope_[k] +
                      (-6 * t2 + 6 * t) * cdf_[k + 1] + (3 * t2 - 2 * t) * h_ * slope_[k + 1];
    double next = df > 0.0 ? t - f / df : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) < 1e-15) {
      t = next;
      break;
    }
    t = next;
  }
  const double z = z_lo_ + (k + t) * h_;
  const double r = std::exp(std::log(d_.r0) + d_.sigma * z);
  return std::clamp(r, d_.r_min, d_.r_max);
}

double pdf(const SizeDistribution& d, double r) { return TruncatedLogNormal(d).pdf(r); }

double sample_radius(const TruncatedLogNormal& dist, SplitMix64& rng) { return dist.sample(rng); }

const char* to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::Sphere: return "sphere";
    case FamilyKind::Prolate: return "prolate";
    case FamilyKind::Oblate: return "oblate";
    case FamilyKind::Carrot: return "carrot";
    case FamilyKind::HalfDome: return "half_dome";
  }
  return "unknown";
}

FamilyKind family_from_string(const std::string& name) {
  for (auto k : {FamilyKind::Sphere, FamilyKind::Prolate, FamilyKind::Oblate, FamilyKind::Carrot,
                 FamilyKind::HalfDome}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("family", "unknown shape family '" + name + "'");
}

ShapeFamily ShapeFamily::defaults(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::Sphere: return {kind, {1, 1, 1, 1, 1, 1}};
    case FamilyKind::Prolate: return {kind, {1, 1, 0.6, 0.6, 0.6, 0.6}};
    case FamilyKind::Oblate: return {kind, {1, 1, 1, 1, 0.6, 0.6}};
    case FamilyKind::Carrot: return {kind, {1, 0.4, 0.35, 0.35, 0.35, 0.35}};
    // Flat dome on +c over a hemispherical base, scaled so the major semi-length is r.
    case FamilyKind::HalfDome: return {kind, {1, 1, 1, 1, 0.25 / 0.7, 1}};
  }
  throw ConfigError("family", "unknown shape family");
}

void ShapeFamily::validate() const {
  double largest = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("ratios", "ratios must lie in (0, 1]");
    largest = std::max(largest, r);
  }
  if (largest != 1.0) throw ConfigError("ratios", "the largest ratio must be exactly 1");
  const bool paired = ratios[0] == ratios[1] && ratios[2] == ratios[3] && ratios[4] == ratios[5];
  switch (kind) {
    case FamilyKind::Sphere:
      if (std::any_of(ratios.begin(), ratios.end(), [](double r) { return r != 1.0; })) {
        throw ConfigError("ratios", "sphere family requires all ratios equal to 1");
      }
      break;
    case FamilyKind::Prolate:
    case FamilyKind::Oblate:
      if (!paired) throw ConfigError("ratios", "ellipsoid families require equal paired ratios");
      break;
    default:
      break;
  }
}

ParticleShape ShapeFamily::make(double r) const {
  const auto& q = ratios;
  switch (kind) {
    case FamilyKind::Sphere: return ParticleShape::sphere(r);
    case FamilyKind::Prolate:
    case FamilyKind::Oblate: return ParticleShape::ellipsoid(q[0] * r, q[2] * r, q[4] * r);
    default: return ParticleShape::poly_ellipsoid(q[0] * r, q[1] * r, q[2] * r, q[3] * r, q[4] * r, q[5] * r);
  }
}

void AssemblySpec::validate() const {
  if (n < 1) throw ConfigError("assembly.n", "must be >= 1");
  if (!(density > 0.0)) throw ConfigError("assembly.density", "must be > 0");
  distribution.validate();
  family.validate();
}

std::vector<Particle> build_assembly(const AssemblySpec& spec) {
  spec.validate();
  const TruncatedLogNormal dist(spec.distribution);
  SplitMix64 rng(spec.seed);
  std::vector<Particle> out;
  out.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double r = dist.sample(rng);
    out.push_back(Particle::make(static_cast<std::int64_t>(i), spec.family.make(r), spec.density));
  }
  return out;
}

std::vector<HistogramRow> histogram_report(std::span<const Particle> assembly, const SizeDistribution& d,
                                           int bins) {
  if (bins < 2) throw std::invalid_argument("histogram_report requires at least two bins");
  const TruncatedLogNormal dist(d);
  const double width = (d.r_max - d.r_min) / bins;
  std::vector<long> counts(static_cast<std::size_t>(bins), 0);
  for (const auto& p : assembly) {
    const int b = std::clamp(static_cast<int>((p.shape.major() - d.r_min) / width), 0, bins - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  std::vector<HistogramRow> rows;
  const double n = std::max<double>(1.0, static_cast<double>(assembly.size()));
  for (int b = 0; b < bins; ++b) {
    const double center = d.r_min + (b + 0.5) * width;
    rows.push_back({center, counts[static_cast<std::size_t>(b)] / (n * width), dist.pdf(center)});
  }
  return rows;
}

}  // namespace granpack
