#pragma once

#include <cstdint>
#include <optional>

#include "granpack/errors.hpp"
#include "granpack/geometry.hpp"

namespace granpack {

// Wall identifiers are negative so they never collide with particle ids.
inline constexpr std::int64_t kFloorId = -1;
inline constexpr std::int64_t kWallXMinId = -2;
inline constexpr std::int64_t kWallXMaxId = -3;
inline constexpr std::int64_t kWallYMinId = -4;
inline constexpr std::int64_t kWallYMaxId = -5;
inline constexpr std::int64_t kWallZMinId = -6;
inline constexpr std::int64_t kWallZMaxId = -7;

constexpr bool is_wall(std::int64_t id) { return id < 0; }

/// Overlap between particle i and particle (or wall) j.
///
/// point_i is the point of i's surface lying deepest inside j, point_j the
/// converse; delta = point_j - point_i and depth = |delta|. The normal is the
/// unit vector -delta / depth, pointing from i towards j.
struct Contact {
  std::int64_t id_i = 0;
  std::int64_t id_j = 0;
  Vec3 point_i = Vec3::Zero();
  Vec3 point_j = Vec3::Zero();
  Vec3 delta = Vec3::Zero();
  Vec3 normal = Vec3::UnitX();
  double depth = 0.0;

  Contact swapped() const;
};

// Infinite plane given by a point and the normal pointing into the domain.
struct Plane {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  std::int64_t id = kFloorId;
};

class ContactNonConvergence : public Error {
 public:
  ContactNonConvergence(std::int64_t id_i, std::int64_t id_j, std::optional<Contact> last_iterate);

  std::int64_t id_i() const noexcept { return id_i_; }
  std::int64_t id_j() const noexcept { return id_j_; }
  // Contact assembled from the last iterate, if the bodies looked overlapping.
  const std::optional<Contact>& last_iterate() const noexcept { return last_; }

 private:
  std::int64_t id_i_;
  std::int64_t id_j_;
  std::optional<Contact> last_;
};

// Deepest contact between two particles; nullopt when they do not overlap.
// Throws ContactNonConvergence if the surface search fails to settle.
std::optional<Contact> detect_contact(const Particle& p_i, const Particle& p_j);

std::optional<Contact> detect_wall_contact(const Particle& p, const Plane& wall);

// depth / (r_eq,i + r_eq,j), r_eq the volume-equivalent radius.
double relative_overlap(const Contact& c, const Particle& p_i, const Particle& p_j);
// depth / r_eq for a particle-wall contact.
double relative_overlap(const Contact& c, const Particle& p);

// Radius of mean curvature of p's surface at a world point on it.
double curvature_radius(const Particle& p, const Vec3& world_point);

struct SurfaceSearch {
  Vec3 point = Vec3::Zero();
  // Implicit function of the other body evaluated at `point`.
  double value = 0.0;
  bool converged = true;
  int iterations = 0;
};

// Point of a's surface minimising b's implicit function.
SurfaceSearch deepest_point(const Particle& a, const Particle& b);

namespace detail {

struct SphereQuadraticMin {
  Vec3 u = Vec3::UnitX();
  bool converged = true;
  int iterations = 0;
};

// Global minimiser of u^T H u + 2 g^T u over the unit sphere, H symmetric
// positive semi-definite. Solves the secular equation of the trust-region
// subproblem with a safeguarded Newton iteration; handles the hard case.
SphereQuadraticMin minimize_quadratic_on_sphere(const Mat3& h, const Vec3& g);

}  // namespace detail

}  // namespace granpack
