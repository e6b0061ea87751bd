#include <doctest.h>

#include <algorithm>
#include <numbers>

#include "granpack/errors.hpp"
#include "granpack/size_distribution.hpp"
#include "support.hpp"

using namespace granpack;
using doctest::Approx;
using testing_support::phi;

namespace {

// Closed-form truncated CDF through the normal CDF.
double oracle_cdf(const SizeDistribution& d, double r) {
  const auto z = [&](double x) { return (std::log(x) - std::log(d.r0)) / d.sigma; };
  if (r <= d.r_min) return 0.0;
  if (r >= d.r_max) return 1.0;
  return (phi(z(r)) - phi(z(d.r_min))) / (phi(z(d.r_max)) - phi(z(d.r_min)));
}

double simpson(const auto& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("density values") {
  SizeDistribution d;
  CHECK(lognormal_density(d, 1.0) == Approx(1.59577).epsilon(1e-5));
  CHECK(pdf(d, 0.1) == 0.0);
  CHECK(pdf(d, 3.0) == 0.0);
  CHECK_THROWS(pdf(d, 0.0));
  CHECK_THROWS(pdf(d, -1.0));
  const TruncatedLogNormal t(d);
  CHECK(simpson([&](double r) { return t.pdf(r); }, 0.2, 2.5, 20000) == Approx(1.0).epsilon(1e-9));
}

TEST_CASE("tabulated CDF and quantile against the closed form") {
  for (const SizeDistribution d : {SizeDistribution{}, SizeDistribution{0.5, 0.6, 0.1, 3.0}}) {
    const TruncatedLogNormal t(d);
    double worst = 0.0;
    for (int k = 0; k <= 1000; ++k) {
      const double r = d.r_min + (d.r_max - d.r_min) * k / 1000.0;
      worst = std::max(worst, std::abs(t.cdf(r) - oracle_cdf(d, r)));
    }
    CHECK(worst < 1e-9);
    for (double u : {0.0, 1e-6, 0.1, 0.5, 0.9, 1.0 - 1e-9}) {
      CHECK(oracle_cdf(d, t.quantile(u)) == Approx(u).epsilon(1e-8));
    }
    CHECK(t.quantile(0.0) == Approx(d.r_min));
    CHECK(t.quantile(1.0) == Approx(d.r_max));
  }
}

TEST_CASE("KS statistic of 1e5 draws") {
  SizeDistribution d;
  const TruncatedLogNormal t(d);
  SplitMix64 rng(123);
  std::vector<double> r(100000);
  for (auto& x : r) {
    x = sample_radius(t, rng);
    REQUIRE(x >= 0.2);
    REQUIRE(x <= 2.5);
  }
  std::sort(r.begin(), r.end());
  double ks = 0.0;
  const double n = static_cast<double>(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double f = oracle_cdf(d, r[i]);
    ks = std::max({ks, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  CHECK(ks < 0.01);
}

TEST_CASE("narrow distributions collapse to r0") {
  const TruncatedLogNormal t(SizeDistribution{1.3, 1e-9, 0.2, 2.5});
  SplitMix64 rng(1);
  for (int k = 0; k < 100; ++k) CHECK(t.sample(rng) == Approx(1.3).epsilon(1e-7));
}

TEST_CASE("shape families") {
  const auto prolate = ShapeFamily::defaults(FamilyKind::Prolate).make(1.0);
  CHECK(prolate.kind() == ShapeKind::Ellipsoid);
  CHECK(prolate.semi(0, false) == 1.0);
  CHECK(prolate.semi(1, false) == Approx(0.6));
  CHECK(prolate.semi(2, false) == Approx(0.6));
  const auto oblate = ShapeFamily::defaults(FamilyKind::Oblate).make(2.0);
  CHECK(oblate.semi(1, false) == 2.0);
  CHECK(oblate.semi(2, false) == Approx(1.2));
  const auto carrot = ShapeFamily::defaults(FamilyKind::Carrot).make(1.0);
  CHECK(carrot.kind() == ShapeKind::PolyEllipsoid);
  CHECK(carrot.semi_lengths() == std::array<double, 6>{1.0, 0.4, 0.35, 0.35, 0.35, 0.35});
  for (auto kind : {FamilyKind::Sphere, FamilyKind::Prolate, FamilyKind::Oblate, FamilyKind::Carrot,
                    FamilyKind::HalfDome}) {
    const auto s = ShapeFamily::defaults(kind).make(1.7);
    CHECK(s.major() == 1.7);
    CHECK(family_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(family_from_string("cube"), ConfigError);
}

TEST_CASE("assemblies are deterministic and follow the sampler") {
  AssemblySpec spec;
  spec.n = 3;
  spec.seed = 99;
  const auto a = build_assembly(spec);
  const auto b = build_assembly(spec);
  REQUIRE(a.size() == 3);
  const TruncatedLogNormal t(spec.distribution);
  SplitMix64 rng(spec.seed);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a[i].id == static_cast<std::int64_t>(i));
    CHECK(a[i].shape == b[i].shape);
    CHECK(a[i].shape.major() == t.sample(rng));
    CHECK(a[i].mass() == Approx(spec.density * a[i].shape.volume()));
  }
}

TEST_CASE("validation names the field") {
  AssemblySpec spec;
  spec.distribution.sigma = -1.0;
  try {
    spec.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field().find("sigma") != std::string::npos);
  }
  spec.distribution = {};
  spec.distribution.r_min = 3.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.distribution = {};
  spec.n = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("histogram report") {
  AssemblySpec spec;
  spec.n = 10000;
  spec.seed = 5;
  const auto parts = build_assembly(spec);
  const auto rows = histogram_report(parts, spec.distribution, 20);
  REQUIRE(rows.size() == 20);
  double peak = 0.0, worst = 0.0, integral = 0.0;
  const double width = (2.5 - 0.2) / 20;
  for (const auto& r : rows) {
    peak = std::max(peak, r.analytic);
    worst = std::max(worst, std::abs(r.empirical - r.analytic));
    integral += r.empirical * width;
  }
  CHECK(worst < 0.1 * peak);
  CHECK(integral == Approx(1.0).epsilon(1e-12));

  const auto two = histogram_report(parts, spec.distribution, 2);
  CHECK(two.size() == 2);
  CHECK((two[0].empirical + two[1].empirical) * (2.3 / 2) == Approx(1.0).epsilon(1e-12));

  spec.n = 1;
  const auto one = histogram_report(build_assembly(spec), spec.distribution, 10);
  CHECK(std::count_if(one.begin(), one.end(), [](const auto& r) { return r.empirical > 0; }) == 1);
}
