#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "granpack/dem.hpp"

namespace audits {

using namespace granpack;

inline DemState single_body(const Particle& p) {
  DemState s;
  s.particles = {p};
  s.velocities = {Vec3::Zero()};
  s.angular_velocities = {Vec3::Zero()};
  s.domain_height = p.position.z() + p.shape.bounding_radius();
  return s;
}

struct FreeFall {
  double drop = 0.0;
  double expected = 0.0;
};

// Drop from rest for `steps` steps of `dt`; compares against g t^2 / 2.
inline FreeFall free_fall(double dt, int steps) {
  Particle p = Particle::make(0, ParticleShape::sphere(0.5), 2650.0);
  p.position = Vec3(10, 10, 1000);
  DemState s = single_body(p);
  DemConfig cfg;
  Container box;
  const double z0 = s.particles[0].position.z();
  for (int k = 0; k < steps; ++k) central_difference_step(s, resultant_loads(s, box, cfg, dt), cfg, dt);
  const double t = dt * steps;
  return {z0 - s.particles[0].position.z(), 0.5 * cfg.gravity.norm() * t * t};
}

struct Bounce {
  int bounces = 0;
  double energy_before = 0.0;
  double max_drift = 0.0;  // relative, over free-flight samples after each bounce
  double dt = 0.0;
};

// Frictionless undamped r = 1 sphere dropped from rest at `start_height`
// (centre height) onto the floor. The energy
// KE + PE + elastic is evaluated in free flight with the velocity
// synchronised to the position time level.
inline Bounce bounce_energy(int bounces_wanted, double start_height = 3.0) {
  DemConfig cfg;
  cfg.material.damping = 0.0;
  cfg.material.friction = 0.0;
  Container box;
  Particle p = Particle::make(0, ParticleShape::sphere(1.0), 2650.0);
  p.position = Vec3(10, 10, start_height);
  DemState s = single_body(p);
  s.domain_height = 2.0 * start_height;
  const double dt = auto_timestep(s.particles, cfg.material);
  const double m = p.mass();
  const double g = cfg.gravity.norm();

  Bounce out;
  out.dt = dt;
  bool in_contact = false;
  long step = 0;
  while (out.bounces < bounces_wanted && step < 10000000) {
    Loads loads = resultant_loads(s, box, cfg, dt);
    const bool touching = !loads.contacts.empty();
    if (!touching) {
      // v at the current time level from the half-step value.
      const Vec3 v = s.velocities[0] + (s.step == 0 ? 0.0 : 0.5 * dt) * loads.force[0] / m;
      const double e = 0.5 * m * v.squaredNorm() + m * g * s.particles[0].position.z();
      if (out.energy_before == 0.0) {
        out.energy_before = e;
      } else if (in_contact) {
        ++out.bounces;
        out.max_drift = std::max(out.max_drift, std::abs(e - out.energy_before) / out.energy_before);
      }
    }
    in_contact = touching;
    central_difference_step(s, std::move(loads), cfg, dt);
    ++step;
  }
  return out;
}

}  // namespace audits
