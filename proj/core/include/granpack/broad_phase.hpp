#pragma once

#include <span>
#include <vector>

#include "granpack/geometry.hpp"

namespace granpack {

enum class DomainKind : std::uint32_t { Open = 0, Periodic = 1, Box = 2 };

// Simulation domain. Periodic domains are the cube [0, L)^3 stored as lo = 0,
// hi = (L, L, L). Box domains are closed containers; `hi.z` may be unbounded.
struct DomainSpec {
  DomainKind kind = DomainKind::Open;
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  static DomainSpec open() { return {}; }
  static DomainSpec periodic(double edge) { return {DomainKind::Periodic, Vec3::Zero(), Vec3::Constant(edge)}; }
  static DomainSpec box(const Vec3& lo, const Vec3& hi) { return {DomainKind::Box, lo, hi}; }

  double edge() const { return hi.x() - lo.x(); }
  bool is_periodic() const { return kind == DomainKind::Periodic; }
};

// Vector d wrapped to its nearest periodic image.
Vec3 minimum_image(const Vec3& d, double edge);

// Candidate pair of particle indices (i < j). `shift` is added to particle j's
// position to obtain the image nearest to particle i.
struct CandidatePair {
  int i = 0;
  int j = 0;
  Vec3 shift = Vec3::Zero();
};

// Uniform-grid broad phase over bounding spheres. The result is sorted by
// (i, j) and is a superset of every overlapping pair.
std::vector<CandidatePair> broad_phase(std::span<const Particle> particles, const DomainSpec& domain);

// O(N^2) reference used by tests and tiny systems.
std::vector<CandidatePair> all_pairs(std::span<const Particle> particles, const DomainSpec& domain);

}  // namespace granpack
