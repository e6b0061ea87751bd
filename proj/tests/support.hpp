#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "granpack/geometry.hpp"
#include "granpack/rng.hpp"
#include "granpack/snapshot.hpp"

namespace testing_support {

using granpack::Particle;
using granpack::ParticleShape;
using granpack::Vec3;

inline Particle at(const ParticleShape& shape, const Vec3& position, std::int64_t id = 0,
                   const granpack::Orientation& q = granpack::Orientation::Identity()) {
  Particle p = Particle::make(id, shape, 1000.0);
  p.position = position;
  p.orientation = q;
  return p;
}

inline Particle sphere_at(double r, const Vec3& position, std::int64_t id = 0) {
  return at(ParticleShape::sphere(r), position, id);
}

// n^3 touching spheres of radius r on a simple cubic lattice, periodic cell
// edge n * 2r.
inline granpack::PackingSnapshot cubic_lattice(int n, double r) {
  granpack::PackingSnapshot s;
  s.provenance = granpack::Provenance::MonteCarlo;
  const double d = 2.0 * r;
  s.domain = granpack::DomainSpec::periodic(n * d);
  std::int64_t id = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        s.particles.push_back(sphere_at(r, Vec3((i + 0.5) * d, (j + 0.5) * d, (k + 0.5) * d), id));
        ++id;
      }
  return s;
}

// Standard normal CDF.
inline double phi(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace testing_support
