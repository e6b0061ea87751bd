#include "granpack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace granpack {

const char* to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Ellipsoid: return "ellipsoid";
    case ShapeKind::PolyEllipsoid: return "poly_ellipsoid";
  }
  return "unknown";
}

int octant_of(const Vec3& local) {
  return (local.x() < 0.0 ? 1 : 0) | (local.y() < 0.0 ? 2 : 0) | (local.z() < 0.0 ? 4 : 0);
}

namespace {

void require_positive(const std::array<double, 6>& semi) {
  for (double s : semi) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw std::invalid_argument("shape semi-lengths must be finite and strictly positive, got " +
                                  std::to_string(s));
    }
  }
}

}  // namespace

ParticleShape ParticleShape::sphere(double radius) {
  return from_semi_lengths(ShapeKind::Sphere, {radius, radius, radius, radius, radius, radius});
}

ParticleShape ParticleShape::ellipsoid(double a, double b, double c) {
  return from_semi_lengths(ShapeKind::Ellipsoid, {a, a, b, b, c, c});
}

ParticleShape ParticleShape::poly_ellipsoid(double a_pos, double a_neg, double b_pos, double b_neg,
                                            double c_pos, double c_neg) {
  return from_semi_lengths(ShapeKind::PolyEllipsoid, {a_pos, a_neg, b_pos, b_neg, c_pos, c_neg});
}

ParticleShape ParticleShape::from_semi_lengths(ShapeKind kind, const std::array<double, 6>& semi) {
  require_positive(semi);
  switch (kind) {
    case ShapeKind::Sphere:
      if (std::any_of(semi.begin(), semi.end(), [&](double s) { return s != semi[0]; })) {
        throw std::invalid_argument("sphere requires six equal semi-lengths");
      }
      break;
    case ShapeKind::Ellipsoid:
      if (semi[0] != semi[1] || semi[2] != semi[3] || semi[4] != semi[5]) {
        throw std::invalid_argument("ellipsoid requires equal paired semi-lengths");
      }
      break;
    case ShapeKind::PolyEllipsoid:
      break;
    default:
      throw std::invalid_argument("unknown shape kind");
  }
  return ParticleShape(kind, semi);
}

Vec3 ParticleShape::octant_semi_axes(int octant) const noexcept {
  return {semi(0, octant & 1), semi(1, octant & 2), semi(2, octant & 4)};
}

double ParticleShape::major() const noexcept { return *std::max_element(semi_.begin(), semi_.end()); }

double ParticleShape::minor() const noexcept { return *std::min_element(semi_.begin(), semi_.end()); }

double ParticleShape::volume() const noexcept {
  // Each octant piece holds one eighth of its parent ellipsoid: (pi/6) * A * B * C.
  double v = 0.0;
  for (int o = 0; o < 8; ++o) {
    const Vec3 s = octant_semi_axes(o);
    v += s.prod();
  }
  return std::numbers::pi / 6.0 * v;
}

double ParticleShape::equivalent_radius() const noexcept {
  return std::cbrt(3.0 * volume() / (4.0 * std::numbers::pi));
}

double ParticleShape::bounding_radius() const noexcept { return major() + centroid_offset().norm(); }

Vec3 ParticleShape::centroid_offset() const noexcept {
  if (is_symmetric()) return Vec3::Zero();
  // First moment of an octant piece along axis k: s_k * (pi/16) * L_k * A * B * C.
  Vec3 first = Vec3::Zero();
  for (int o = 0; o < 8; ++o) {
    const Vec3 s = octant_semi_axes(o);
    const double abc = s.prod();
    for (int k = 0; k < 3; ++k) {
      const double sign = (o >> k) & 1 ? -1.0 : 1.0;
      first[k] += sign * s[k] * abc;
    }
  }
  first *= std::numbers::pi / 16.0;
  return first / volume();
}

double ParticleShape::implicit(const Vec3& local) const noexcept {
  double f = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double q = local[k] / semi(k, local[k] < 0.0);
    f += q * q;
  }
  return f;
}

Vec3 ParticleShape::implicit_gradient(const Vec3& local) const noexcept {
  Vec3 g;
  for (int k = 0; k < 3; ++k) {
    const double l = semi(k, local[k] < 0.0);
    g[k] = 2.0 * local[k] / (l * l);
  }
  return g;
}

Vec3 ParticleShape::project_to_surface(const Vec3& local) const noexcept {
  // The implicit function is 2-homogeneous inside every octant.
  return local / std::sqrt(implicit(local));
}

Vec3 ParticleShape::support(const Vec3& dir_local) const noexcept {
  Vec3 l2;
  for (int k = 0; k < 3; ++k) {
    const double l = semi(k, dir_local[k] < 0.0);
    l2[k] = l * l;
  }
  const double denom = std::sqrt((l2.array() * dir_local.array().square()).sum());
  return (l2.array() * dir_local.array()).matrix() / denom;
}

double ParticleShape::mean_curvature_radius(const Vec3& local) const noexcept {
  const Vec3 s = octant_semi_axes(octant_of(local));
  const Vec3 s2 = s.array().square();
  const double h = std::sqrt((local.array().square() / s2.array().square()).sum());
  const double abc2 = s2.prod();
  const double mean_curvature =
      std::abs(local.squaredNorm() - s2.sum()) / (2.0 * abc2 * h * h * h);
  return 1.0 / mean_curvature;
}

ParticleShape ParticleShape::inflated(double amount) const {
  std::array<double, 6> grown = semi_;
  for (double& s : grown) s += amount;
  return from_semi_lengths(kind_, grown);
}

double volume(const ParticleShape& shape) { return shape.volume(); }

MassProperties inertia(const ParticleShape& shape, double density) {
  if (!(density > 0.0)) throw std::invalid_argument("density must be positive");
  MassProperties out;
  const double v = shape.volume();
  out.mass = density * v;
  out.centroid_offset = shape.centroid_offset();

  // Second moments about the junction, summed over octant pieces:
  //   int x_k^2     = (pi/30) L_k^2 * ABC
  //   int x_k x_l   = s_k s_l L_k L_l * ABC / 15
  Mat3 second = Mat3::Zero();
  for (int o = 0; o < 8; ++o) {
    const Vec3 s = shape.octant_semi_axes(o);
    const double abc = s.prod();
    Vec3 sign;
    for (int k = 0; k < 3; ++k) sign[k] = (o >> k) & 1 ? -1.0 : 1.0;
    for (int k = 0; k < 3; ++k) {
      second(k, k) += std::numbers::pi / 30.0 * s[k] * s[k] * abc;
      for (int l = k + 1; l < 3; ++l) {
        const double m = sign[k] * sign[l] * s[k] * s[l] * abc / 15.0;
        second(k, l) += m;
        second(l, k) += m;
      }
    }
  }
  const Vec3& c = out.centroid_offset;
  const Mat3 central = second - v * c * c.transpose();
  out.inertia = density * (central.trace() * Mat3::Identity() - central);
  if (shape.is_symmetric()) {
    out.principal_moments = out.inertia.diagonal();
    std::sort(out.principal_moments.data(), out.principal_moments.data() + 3);
  } else {
    Eigen::SelfAdjointEigenSolver<Mat3> eig(out.inertia);
    out.principal_moments = eig.eigenvalues();
  }
  return out;
}

Particle Particle::make(std::int64_t id, const ParticleShape& shape, double density) {
  Particle p;
  p.id = id;
  p.shape = shape;
  p.density = density;
  p.props = inertia(shape, density);
  return p;
}

}  // namespace granpack
