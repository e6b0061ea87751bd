#include <doctest.h>

#include <cmath>

#include "granpack/contact.hpp"
#include "support.hpp"

using namespace granpack;
using doctest::Approx;
using testing_support::at;
using testing_support::sphere_at;

namespace {

Vec3 random_unit(SplitMix64& rng) {
  for (;;) {
    const Vec3 v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (v.norm() > 0.1 && v.norm() <= 1.0) return v.normalized();
  }
}

// Extent of a rotated ellipsoid along unit n: sqrt(n^T R diag(a^2) R^T n).
double ellipsoid_extent(const Vec3& semi, const Orientation& q, const Vec3& n) {
  const Vec3 local = q.conjugate() * n;
  return std::sqrt((local.array().square() * semi.array().square()).sum());
}

}  // namespace

TEST_CASE("collinear unit spheres") {
  const auto c = detect_contact(sphere_at(1, Vec3::Zero(), 0), sphere_at(1, Vec3(1, 0, 0), 1));
  REQUIRE(c);
  CHECK(c->depth == Approx(1.0).epsilon(1e-15));
  CHECK((c->point_i - Vec3(1, 0, 0)).norm() < 1e-15);
  CHECK((c->point_j - Vec3(0, 0, 0)).norm() < 1e-15);
  CHECK((c->delta - Vec3(-1, 0, 0)).norm() < 1e-15);
  CHECK((c->normal - Vec3(1, 0, 0)).norm() < 1e-15);
  CHECK(c->id_i == 0);
  CHECK(c->id_j == 1);

  CHECK_FALSE(detect_contact(sphere_at(1, Vec3::Zero(), 0), sphere_at(1, Vec3(2.5, 0, 0), 1)));
}

TEST_CASE("axis-aligned ellipsoids touching along the major axis") {
  const ParticleShape s = ParticleShape::ellipsoid(2, 1, 0.5);
  const auto c = detect_contact(at(s, Vec3::Zero(), 0), at(s, Vec3(3.7, 0, 0), 1));
  REQUIRE(c);
  CHECK(c->depth == Approx(0.3).epsilon(1e-10));
  CHECK((c->normal - Vec3::UnitX()).norm() < 1e-10);
  CHECK_FALSE(detect_contact(at(s, Vec3::Zero(), 0), at(s, Vec3(0, 0, 1.01), 1)));
  const auto side = detect_contact(at(s, Vec3::Zero(), 0), at(s, Vec3(0, 0, 0.9), 1));
  REQUIRE(side);
  CHECK(side->depth == Approx(0.1).epsilon(1e-10));
}

TEST_CASE("wall contact") {
  const Plane floor{};
  const auto c = detect_wall_contact(sphere_at(1, Vec3(0, 0, 0.5)), floor);
  REQUIRE(c);
  CHECK(c->depth == Approx(0.5).epsilon(1e-15));
  CHECK((c->normal - Vec3(0, 0, -1)).norm() < 1e-15);
  CHECK(c->id_j == kFloorId);
  CHECK_FALSE(detect_wall_contact(sphere_at(1, Vec3(0, 0, 1.5)), floor));

  // Prolate standing on its major axis.
  const Orientation up(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitY()));
  const auto p = detect_wall_contact(at(ParticleShape::ellipsoid(2, 1, 1), Vec3(0, 0, 1.5), 0, up), floor);
  REQUIRE(p);
  CHECK(p->depth == Approx(0.5).epsilon(1e-12));

  // Random poses against the support formula.
  SplitMix64 rng(21);
  const Vec3 semi(2, 1, 0.5);
  for (int k = 0; k < 200; ++k) {
    const Orientation q = rng.orientation();
    const double h = rng.uniform(0.2, 2.5);
    const auto w = detect_wall_contact(at(ParticleShape::ellipsoid(2, 1, 0.5), Vec3(0, 0, h), 0, q), floor);
    const double expected = ellipsoid_extent(semi, q, Vec3::UnitZ()) - h;
    if (expected > 1e-9) {
      REQUIRE(w);
      CHECK(w->depth == Approx(expected).epsilon(1e-12));
      CHECK(std::abs(w->point_j.z()) < 1e-12);
    } else if (expected < -1e-9) {
      CHECK_FALSE(w);
    }
  }
}

TEST_CASE("relative overlap normalisation") {
  Contact c;
  c.depth = 1.0;
  CHECK(relative_overlap(c, sphere_at(1, Vec3::Zero()), sphere_at(1, Vec3::UnitX())) == Approx(0.5));
  const ParticleShape prolate = ParticleShape::ellipsoid(2, 1, 1);
  c.depth = 0.3;
  CHECK(relative_overlap(c, at(prolate, Vec3::Zero()), at(prolate, Vec3::UnitX())) ==
        Approx(0.11906).epsilon(1e-4));
  c.depth = 0.0;
  CHECK(relative_overlap(c, sphere_at(1, Vec3::Zero())) == 0.0);
}

TEST_CASE("symmetry and rigid-motion equivariance") {
  SplitMix64 rng(33);
  const ParticleShape shapes[] = {ParticleShape::ellipsoid(1.0, 0.6, 0.6),
                                  ParticleShape::ellipsoid(1.0, 1.0, 0.6),
                                  ParticleShape::poly_ellipsoid(1.0, 0.4, 0.35, 0.35, 0.35, 0.35),
                                  ParticleShape::poly_ellipsoid(0.7, 0.7, 0.7, 0.7, 0.25, 0.7)};
  int tested = 0;
  for (int k = 0; k < 200; ++k) {
    const ParticleShape& sa = shapes[rng.next() % 4];
    const ParticleShape& sb = shapes[rng.next() % 4];
    const Particle a = at(sa, Vec3::Zero(), 0, rng.orientation());
    const Particle b = at(sb, 1.1 * random_unit(rng), 1, rng.orientation());
    const auto ab = detect_contact(a, b);
    const auto ba = detect_contact(b, a);
    REQUIRE(ab.has_value() == ba.has_value());
    if (!ab) continue;
    ++tested;
    CHECK(ab->depth == Approx(ba->depth).epsilon(1e-10));
    CHECK((ab->point_i - ba->point_j).norm() < 1e-8);
    CHECK((ab->delta + ba->delta).norm() < 1e-8);
    CHECK(std::abs(a.surface_residual(ab->point_i)) < 1e-8);
    CHECK(std::abs(b.surface_residual(ab->point_j)) < 1e-8);

    const Orientation g = rng.orientation();
    const Vec3 shift(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    Particle a2 = a, b2 = b;
    a2.position = g * a.position + shift;
    b2.position = g * b.position + shift;
    a2.orientation = g * a.orientation;
    b2.orientation = g * b.orientation;
    const auto moved = detect_contact(a2, b2);
    REQUIRE(moved);
    CHECK(moved->depth == Approx(ab->depth).epsilon(1e-9));
    CHECK((moved->delta - g * ab->delta).norm() < 1e-8);
  }
  CHECK(tested > 50);
}

TEST_CASE("degeneracy chain: ellipsoid a=b=c against the sphere closed form") {
  SplitMix64 rng(44);
  for (int k = 0; k < 200; ++k) {
    const double ra = rng.uniform(0.3, 1.5), rb = rng.uniform(0.3, 1.5);
    const Vec3 pos = rng.uniform(0.2, 0.98) * (ra + rb) * random_unit(rng);
    const auto exact = detect_contact(sphere_at(ra, Vec3::Zero(), 0), sphere_at(rb, pos, 1));
    const auto general = detect_contact(at(ParticleShape::ellipsoid(ra, ra, ra), Vec3::Zero(), 0, rng.orientation()),
                                        at(ParticleShape::ellipsoid(rb, rb, rb), pos, 1, rng.orientation()));
    REQUIRE(exact);
    REQUIRE(general);
    CHECK(general->depth == Approx(exact->depth).epsilon(1e-8));
    CHECK((general->normal - exact->normal).norm() < 1e-8);
  }
}

TEST_CASE("degeneracy chain: symmetric poly-ellipsoid against the ellipsoid kernel") {
  SplitMix64 rng(55);
  for (int k = 0; k < 200; ++k) {
    const Vec3 sa(rng.uniform(0.4, 1.2), rng.uniform(0.4, 1.2), rng.uniform(0.4, 1.2));
    const Vec3 sb(rng.uniform(0.4, 1.2), rng.uniform(0.4, 1.2), rng.uniform(0.4, 1.2));
    const Orientation qa = rng.orientation(), qb = rng.orientation();
    const Vec3 pos = rng.uniform(0.3, 1.6) * random_unit(rng);
    const auto ell = detect_contact(at(ParticleShape::ellipsoid(sa.x(), sa.y(), sa.z()), Vec3::Zero(), 0, qa),
                                    at(ParticleShape::ellipsoid(sb.x(), sb.y(), sb.z()), pos, 1, qb));
    const auto poly = detect_contact(
        at(ParticleShape::poly_ellipsoid(sa.x(), sa.x(), sa.y(), sa.y(), sa.z(), sa.z()), Vec3::Zero(), 0, qa),
        at(ParticleShape::poly_ellipsoid(sb.x(), sb.x(), sb.y(), sb.y(), sb.z(), sb.z()), pos, 1, qb));
    REQUIRE(ell.has_value() == poly.has_value());
    if (!ell) continue;
    CHECK(poly->depth == Approx(ell->depth).epsilon(1e-8));
  }
}

TEST_CASE("separation soundness against dense surface sampling") {
  SplitMix64 rng(66);
  const ParticleShape s = ParticleShape::poly_ellipsoid(1.0, 0.4, 0.35, 0.35, 0.35, 0.35);
  int separated = 0;
  for (int k = 0; k < 60; ++k) {
    const Particle a = at(s, Vec3::Zero(), 0, rng.orientation());
    const Particle b = at(s, rng.uniform(0.6, 1.6) * random_unit(rng), 1, rng.orientation());
    if (detect_contact(a, b)) continue;
    ++separated;
    for (int t = 0; t < 10000; ++t) {
      const Vec3 d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      if (d.norm() < 1e-6) continue;
      CHECK_FALSE(b.contains(a.to_world(s.project_to_surface(d))));
    }
  }
  CHECK(separated > 5);
}

TEST_CASE("sphere-constrained quadratic minimiser matches brute force") {
  SplitMix64 rng(77);
  for (int k = 0; k < 100; ++k) {
    Mat3 m;
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = rng.uniform(-1, 1);
    Mat3 h = m * m.transpose();
    if (k % 10 == 0) h = Mat3(Vec3(1, 1, 0.5).asDiagonal());  // repeated eigenvalue
    const Vec3 g = k % 5 == 0 ? Vec3::Zero() : Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const auto f = [&](const Vec3& u) { return u.dot(h * u) + 2.0 * g.dot(u); };
    const auto res = detail::minimize_quadratic_on_sphere(h, g);
    CHECK(res.converged);
    CHECK(res.u.norm() == Approx(1.0).epsilon(1e-12));
    // Fibonacci sphere oracle, refined with a local search.
    double best = 1e300;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / n;
      const double phi = i * std::numbers::pi * (3.0 - std::sqrt(5.0));
      const double rho = std::sqrt(1.0 - z * z);
      best = std::min(best, f(Vec3(rho * std::cos(phi), rho * std::sin(phi), z)));
    }
    CHECK(f(res.u) <= best + 1e-12);
  }
}

TEST_CASE("curvature radius of a sphere particle") {
  const Particle p = sphere_at(0.8, Vec3(1, 1, 1));
  CHECK(curvature_radius(p, Vec3(1.8, 1, 1)) == Approx(0.8));
}
