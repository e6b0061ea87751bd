#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace granpack {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
// Unit quaternion, body-to-world.
using Orientation = Eigen::Quaterniond;

enum class ShapeKind : std::uint32_t { Sphere = 0, Ellipsoid = 1, PolyEllipsoid = 2 };

const char* to_string(ShapeKind kind);

// Octant index in the body frame: bit k is set when the coordinate along
// axis k is negative. Points on a boundary plane belong to the positive side.
int octant_of(const Vec3& local);

/// Convex particle shape described by six semi-lengths measured from the
/// junction point along the body axes: (a+, a-, b+, b-, c+, c-).
///
/// Each of the eight octant pieces is the matching octant of the ellipsoid
/// whose semi-axes are the three semi-lengths on that side, so adjacent
/// pieces share the semi-lengths of their common plane and the surface is
/// C1 across octant boundaries. Spheres and ellipsoids are the symmetric
/// special cases; for those the junction is also the centroid.
class ParticleShape {
 public:
  ParticleShape() : ParticleShape(ShapeKind::Sphere, {1, 1, 1, 1, 1, 1}) {}

  static ParticleShape sphere(double radius);
  static ParticleShape ellipsoid(double a, double b, double c);
  static ParticleShape poly_ellipsoid(double a_pos, double a_neg, double b_pos, double b_neg,
                                      double c_pos, double c_neg);
  // Validating constructor used by deserialisation.
  static ParticleShape from_semi_lengths(ShapeKind kind, const std::array<double, 6>& semi);

  ShapeKind kind() const noexcept { return kind_; }
  const std::array<double, 6>& semi_lengths() const noexcept { return semi_; }
  double semi(int axis, bool negative_side) const noexcept { return semi_[2 * axis + (negative_side ? 1 : 0)]; }
  Vec3 octant_semi_axes(int octant) const noexcept;
  bool is_symmetric() const noexcept { return kind_ != ShapeKind::PolyEllipsoid; }

  double major() const noexcept;
  double minor() const noexcept;
  double volume() const noexcept;
  // Radius of the sphere with the same volume.
  double equivalent_radius() const noexcept;
  // Radius about the centroid of a sphere enclosing the whole body.
  double bounding_radius() const noexcept;
  // Junction-to-centroid vector in the body frame (zero for symmetric shapes).
  Vec3 centroid_offset() const noexcept;

  // Piecewise quadratic implicit function, junction frame: < 1 inside, 1 on the surface.
  double implicit(const Vec3& local) const noexcept;
  Vec3 implicit_gradient(const Vec3& local) const noexcept;
  // Radial projection of a nonzero junction-frame vector onto the surface.
  Vec3 project_to_surface(const Vec3& local) const noexcept;
  // Surface point maximising dir . x, junction frame.
  Vec3 support(const Vec3& dir_local) const noexcept;
  // Radius of mean curvature at a junction-frame surface point.
  double mean_curvature_radius(const Vec3& local) const noexcept;
  // Same kind with every semi-length grown by `amount`.
  ParticleShape inflated(double amount) const;

  friend bool operator==(const ParticleShape&, const ParticleShape&) = default;

 private:
  ParticleShape(ShapeKind kind, const std::array<double, 6>& semi) : kind_(kind), semi_(semi) {}

  ShapeKind kind_;
  std::array<double, 6> semi_;
};

double volume(const ParticleShape& shape);

struct MassProperties {
  double mass = 0.0;
  // Inertia tensor about the centroid in the body frame.
  Mat3 inertia = Mat3::Zero();
  // Eigenvalues of `inertia`, ascending.
  Vec3 principal_moments = Vec3::Zero();
  Vec3 centroid_offset = Vec3::Zero();
};

MassProperties inertia(const ParticleShape& shape, double density);

struct Particle {
  std::int64_t id = 0;
  ParticleShape shape;
  // World position of the centroid.
  Vec3 position = Vec3::Zero();
  Orientation orientation = Orientation::Identity();
  double density = 1.0;
  MassProperties props;

  static Particle make(std::int64_t id, const ParticleShape& shape, double density);

  double mass() const noexcept { return props.mass; }
  Mat3 rotation() const { return orientation.toRotationMatrix(); }
  // World position of the octant junction point.
  Vec3 junction() const { return position - orientation * props.centroid_offset; }
  Vec3 to_local(const Vec3& world) const { return orientation.conjugate() * (world - junction()); }
  Vec3 to_world(const Vec3& local) const { return junction() + orientation * local; }
  // Surface residual of a world point: implicit value minus one.
  double surface_residual(const Vec3& world) const { return shape.implicit(to_local(world)) - 1.0; }
  bool contains(const Vec3& world) const { return shape.implicit(to_local(world)) < 1.0; }
};

}  // namespace granpack
