#include "granpack/dem.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>

#include "granpack/broad_phase.hpp"
#include "granpack/errors.hpp"
#include "granpack/parallel.hpp"
#include "granpack/rng.hpp"

namespace granpack {

double Material::effective_youngs() const {
  return youngs_modulus / (2.0 * (1.0 - poisson_ratio * poisson_ratio));
}

double Material::effective_shear() const { return shear_modulus() / (2.0 * (2.0 - poisson_ratio)); }

void Material::validate() const {
  if (!(youngs_modulus > 0.0)) throw ConfigError("dem.material.youngs_modulus", "must be > 0");
  if (!(poisson_ratio >= 0.0 && poisson_ratio < 0.5)) {
    throw ConfigError("dem.material.poisson_ratio", "must lie in [0, 0.5)");
  }
  if (!(friction >= 0.0)) throw ConfigError("dem.material.friction", "must be >= 0");
  if (!(damping >= 0.0 && damping < 1.0)) throw ConfigError("dem.material.damping", "must lie in [0, 1)");
  if (!(rolling_friction >= 0.0)) throw ConfigError("dem.material.rolling_friction", "must be >= 0");
  if (!(rolling_damping >= 0.0 && rolling_damping < 1.0)) {
    throw ConfigError("dem.material.rolling_damping", "must lie in [0, 1)");
  }
}

std::vector<Plane> Container::walls() const {
  return {
      {Vec3::Zero(), Vec3::UnitZ(), kFloorId},
      {Vec3::Zero(), Vec3::UnitX(), kWallXMinId},
      {Vec3(width_x, 0.0, 0.0), -Vec3::UnitX(), kWallXMaxId},
      {Vec3::Zero(), Vec3::UnitY(), kWallYMinId},
      {Vec3(0.0, width_y, 0.0), -Vec3::UnitY(), kWallYMaxId},
  };
}

void Container::validate() const {
  if (!(width_x > 0.0)) throw ConfigError("dem.container.width_x", "must be > 0");
  if (!(width_y > 0.0)) throw ConfigError("dem.container.width_y", "must be > 0");
}

void DemConfig::validate() const {
  material.validate();
  if (!gravity.allFinite()) throw ConfigError("dem.gravity", "must be finite");
  if (!std::isfinite(dt)) throw ConfigError("dem.dt", "must be finite or 'auto'");
  if (!(rest_ke_threshold > 0.0)) throw ConfigError("dem.rest_ke_threshold", "must be > 0");
  if (rest_window < 1) throw ConfigError("dem.rest_window", "must be >= 1");
  if (max_steps < 1) throw ConfigError("dem.max_steps", "must be >= 1");
  if (trace_interval < 1) throw ConfigError("dem.trace_interval", "must be >= 1");
}

namespace {

// Curvature radius with a volume-equivalent fallback for ill-conditioned
// evaluations (flat spots, octant seams far from the pole).
double local_radius(const Particle& p, const Vec3& point) {
  const double req = p.shape.equivalent_radius();
  const double r = curvature_radius(p, point);
  if (!std::isfinite(r) || !(r > 0.0) || r > 1e8 * req || r < 1e-8 * req) return req;
  return r;
}

Vec3 point_velocity(const DemState& s, int k, const Vec3& point) {
  const Particle& p = s.particles[static_cast<std::size_t>(k)];
  const Vec3 w = p.orientation * s.angular_velocities[static_cast<std::size_t>(k)];
  return s.velocities[static_cast<std::size_t>(k)] + w.cross(point - p.position);
}

}  // namespace

ContactPhysics contact_physics(const Contact& c, const Particle& p_i, const Particle* p_j, const Material& m) {
  ContactPhysics phys;
  phys.e_star = m.effective_youngs();
  phys.g_star = m.effective_shear();
  const double r_i = local_radius(p_i, c.point_i);
  const auto lever_inertia = [](const Particle& p, const Vec3& point) {
    return p.props.inertia.trace() / 3.0 + p.mass() * (point - p.position).squaredNorm();
  };
  const double ii = lever_inertia(p_i, c.point_i);
  if (p_j) {
    const double r_j = local_radius(*p_j, c.point_j);
    const double ij = lever_inertia(*p_j, c.point_j);
    phys.r_star = r_i * r_j / (r_i + r_j);
    phys.m_star = p_i.mass() * p_j->mass() / (p_i.mass() + p_j->mass());
    phys.i_star = ii * ij / (ii + ij);
  } else {
    phys.r_star = r_i;
    phys.m_star = p_i.mass();
    phys.i_star = ii;
  }
  return phys;
}

double hertz_stiffness(const ContactPhysics& phys, double depth) {
  return 2.0 * phys.e_star * std::sqrt(phys.r_star * std::max(depth, 0.0));
}

double hertz_energy(const ContactPhysics& phys, double depth) {
  if (!(depth > 0.0)) return 0.0;
  return 8.0 / 15.0 * phys.e_star * std::sqrt(phys.r_star) * std::pow(depth, 2.5);
}

double equilibrium_depth(const ContactPhysics& phys, double weight) {
  return std::pow(weight / (4.0 / 3.0 * phys.e_star * std::sqrt(phys.r_star)), 2.0 / 3.0);
}

Vec3 hertz_normal_force(const Contact& c, const ContactPhysics& phys, const Material& m, double approach_speed) {
  if (!(c.depth > 0.0)) return Vec3::Zero();
  const double elastic = 4.0 / 3.0 * phys.e_star * std::sqrt(phys.r_star) * std::pow(c.depth, 1.5);
  const double viscous = 2.0 * m.damping * std::sqrt(hertz_stiffness(phys, c.depth) * phys.m_star) * approach_speed;
  const double magnitude = std::max(0.0, elastic + viscous);
  return -magnitude * c.normal;
}

Vec3 mindlin_tangential_force(const Contact& c, const ContactPhysics& phys, const Material& m,
                              double normal_force, Vec3& memory, const Vec3& tangential_velocity, double dt) {
  const Vec3& n = c.normal;
  const double kt = 8.0 * phys.g_star * std::sqrt(phys.r_star * std::max(c.depth, 0.0));
  if (!(kt > 0.0)) {
    memory.setZero();
    return Vec3::Zero();
  }
  const double old_norm = memory.norm();
  memory -= memory.dot(n) * n;
  const double in_plane = memory.norm();
  if (in_plane > 0.0) memory *= old_norm / in_plane;

  // Incremental update: stiffness changes act on new displacement only.
  memory -= kt * dt * tangential_velocity;
  const double cap = m.friction * std::abs(normal_force);
  const double magnitude = memory.norm();
  if (magnitude > cap) memory *= magnitude > 0.0 ? cap / magnitude : 0.0;
  return memory;
}

Vec3 rolling_resistance_moment(const Contact& c, const ContactPhysics& phys, const Material& m, double normal_force,
                               Vec3& memory, const Vec3& relative_spin, double dt) {
  const double kr = 2.25 * m.rolling_friction * m.rolling_friction * phys.r_star * phys.r_star *
                    hertz_stiffness(phys, c.depth);
  if (!(kr > 0.0)) {
    memory.setZero();
    return Vec3::Zero();
  }
  const Vec3& n = c.normal;
  const double cap = m.rolling_friction * phys.r_star * std::abs(normal_force);
  const double eta = 2.0 * m.rolling_damping * std::sqrt(kr * phys.i_star);

  const double spin_n = relative_spin.dot(n);
  const Vec3 spin_t = relative_spin - spin_n * n;
  double twist = memory.dot(n) - kr * dt * spin_n;
  Vec3 roll = memory - memory.dot(n) * n - kr * dt * spin_t;

  Vec3 damping = Vec3::Zero();
  if (std::abs(twist) >= cap) {
    twist = std::copysign(cap, twist);
  } else {
    damping -= eta * spin_n * n;
  }
  const double roll_norm = roll.norm();
  if (roll_norm >= cap) {
    roll *= roll_norm > 0.0 ? cap / roll_norm : 0.0;
  } else {
    damping -= eta * spin_t;
  }
  memory = roll + twist * n;
  return memory + damping;
}

double auto_timestep(std::span<const Particle> particles, const Material& m) {
  if (particles.empty()) throw std::invalid_argument("auto_timestep requires particles");
  double m_min = std::numeric_limits<double>::infinity();
  double r_min = std::numeric_limits<double>::infinity();
  double r_max = 0.0;
  for (const auto& p : particles) {
    m_min = std::min(m_min, p.mass());
    r_min = std::min(r_min, p.shape.minor());
    r_max = std::max(r_max, p.shape.major());
  }
  // Wall contact of the largest body is the stiffest pairing.
  ContactPhysics phys;
  phys.e_star = m.effective_youngs();
  phys.r_star = r_max;
  const double k_max = hertz_stiffness(phys, 1e-3 * r_min);
  return 0.2 * std::sqrt(m_min / k_max);
}

double resolve_dt(std::span<const Particle> particles, const DemConfig& config) {
  return config.dt > 0.0 ? config.dt : auto_timestep(particles, config.material);
}

DemState initial_fill(std::vector<Particle> assembly, const Container& container, std::uint64_t seed) {
  container.validate();
  if (assembly.empty()) throw std::invalid_argument("initial_fill requires particles");
  const double width = std::min(container.width_x, container.width_y);

  double total_volume = 0.0;
  for (const auto& p : assembly) {
    total_volume += p.shape.volume();
    if (1.1 * 2.0 * p.shape.bounding_radius() > width) {
      throw Error("FILL_OVERFLOW", "particle " + std::to_string(p.id) + " is wider than the container");
    }
  }
  double d_max = 0.0;
  for (const auto& p : assembly) d_max = std::max(d_max, 2.0 * p.shape.bounding_radius());
  // A column is at least one particle tall.
  const double dense_height = std::max(total_volume / (0.64 * container.width_x * container.width_y), d_max);

  SplitMix64 rng(derive_seed(seed, 0x44454d));
  std::vector<std::size_t> order(assembly.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t k = order.size(); k > 1; --k) {
    std::swap(order[k - 1], order[static_cast<std::size_t>(rng.next() % k)]);
  }

  double x = 0.0, row_y = 0.0, row_depth = 0.0, layer_z = 0.0, layer_height = 0.0, top = 0.0;
  for (std::size_t idx : order) {
    Particle& p = assembly[idx];
    const double d = 2.0 * p.shape.bounding_radius();
    const double slot = 1.1 * d;
    if (x + slot > container.width_x) {
      x = 0.0;
      row_y += row_depth;
      row_depth = 0.0;
    }
    if (row_y + slot > container.width_y) {
      x = 0.0;
      row_y = 0.0;
      row_depth = 0.0;
      layer_z += layer_height;
      layer_height = 0.0;
    }
    auto jitter = [&] { return 0.04 * d * (2.0 * rng.uniform() - 1.0); };
    const double jx = jitter(), jy = jitter(), jz = jitter();
    p.position = Vec3(x + 0.5 * slot + jx, row_y + 0.5 * slot + jy, layer_z + 0.5 * slot + jz);
    p.orientation = rng.orientation();
    x += slot;
    row_depth = std::max(row_depth, slot);
    layer_height = std::max(layer_height, slot);
    top = std::max(top, p.position.z() + 0.5 * d);
  }
  if (top > 10.0 * dense_height) {
    throw Error("FILL_OVERFLOW", "fill column height " + std::to_string(top) + " exceeds ten times the dense height " +
                                     std::to_string(dense_height));
  }

  DemState state;
  state.particles = std::move(assembly);
  state.velocities.assign(state.particles.size(), Vec3::Zero());
  state.angular_velocities.assign(state.particles.size(), Vec3::Zero());
  state.domain_height = top;
  return state;
}

std::vector<DemContact> find_contacts(const DemState& state, const Container& container, const DemConfig& config) {
  const auto& ps = state.particles;
  const auto pairs = broad_phase(ps, DomainSpec::open());
  std::vector<std::optional<DemContact>> slots(pairs.size());
  parallel_for(pairs.size(), config.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto& cp = pairs[k];
      if (auto c = detect_contact(ps[static_cast<std::size_t>(cp.i)], ps[static_cast<std::size_t>(cp.j)])) {
        DemContact dc;
        dc.i = cp.i;
        dc.j = cp.j;
        dc.contact = *c;
        slots[k] = dc;
      }
    }
  });
  std::vector<DemContact> out;
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  const auto walls = container.walls();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double reach = ps[i].shape.bounding_radius();
    for (const auto& w : walls) {
      if (w.normal.dot(ps[i].position - w.point) > reach) continue;
      if (auto c = detect_wall_contact(ps[i], w)) {
        DemContact dc;
        dc.i = static_cast<int>(i);
        dc.j = -1;
        dc.contact = *c;
        out.push_back(dc);
      }
    }
  }
  return out;
}

Loads resultant_loads(const DemState& state, const Container& container, const DemConfig& config, double dt) {
  const auto& ps = state.particles;
  const Material& mat = config.material;
  Loads loads;
  loads.contacts = find_contacts(state, container, config);
  std::vector<Vec3> memories(loads.contacts.size(), Vec3::Zero());
  std::vector<Vec3> rolling(loads.contacts.size(), Vec3::Zero());

  parallel_for(loads.contacts.size(), config.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      DemContact& dc = loads.contacts[k];
      const Contact& c = dc.contact;
      const Particle& pi = ps[static_cast<std::size_t>(dc.i)];
      const Particle* pj = dc.j >= 0 ? &ps[static_cast<std::size_t>(dc.j)] : nullptr;
      dc.physics = contact_physics(c, pi, pj, mat);

      const Vec3 at = 0.5 * (c.point_i + c.point_j);
      Vec3 v_rel = point_velocity(state, dc.i, at);
      if (dc.j >= 0) v_rel -= point_velocity(state, dc.j, at);
      const double approach = v_rel.dot(c.normal);
      const Vec3 v_t = v_rel - approach * c.normal;

      dc.normal_force = hertz_normal_force(c, dc.physics, mat, approach);
      auto it = state.memory.find({c.id_i, c.id_j});
      Vec3 memory = it == state.memory.end() ? Vec3::Zero() : it->second;
      dc.tangential_force =
          mindlin_tangential_force(c, dc.physics, mat, dc.normal_force.norm(), memory, v_t, dt);
      memories[k] = memory;

      Vec3 spin = pi.orientation * state.angular_velocities[static_cast<std::size_t>(dc.i)];
      if (pj) spin -= pj->orientation * state.angular_velocities[static_cast<std::size_t>(dc.j)];
      auto rt = state.rolling_memory.find({c.id_i, c.id_j});
      Vec3 roll = rt == state.rolling_memory.end() ? Vec3::Zero() : rt->second;
      dc.rolling_moment = rolling_resistance_moment(c, dc.physics, mat, dc.normal_force.norm(), roll, spin, dt);
      rolling[k] = roll;
    }
  });

  loads.force.assign(ps.size(), Vec3::Zero());
  loads.moment.assign(ps.size(), Vec3::Zero());
  for (std::size_t i = 0; i < ps.size(); ++i) loads.force[i] = ps[i].mass() * config.gravity;
  for (std::size_t k = 0; k < loads.contacts.size(); ++k) {
    const DemContact& dc = loads.contacts[k];
    const Vec3 f = dc.force();
    const Vec3 at = 0.5 * (dc.contact.point_i + dc.contact.point_j);
    const auto i = static_cast<std::size_t>(dc.i);
    loads.force[i] += f;
    loads.moment[i] += (at - ps[i].position).cross(f) + dc.rolling_moment;
    if (dc.j >= 0) {
      const auto j = static_cast<std::size_t>(dc.j);
      loads.force[j] -= f;
      loads.moment[j] -= (at - ps[j].position).cross(f) + dc.rolling_moment;
    }
    loads.memory.emplace(PairKey{dc.contact.id_i, dc.contact.id_j}, memories[k]);
    if (rolling[k] != Vec3::Zero()) loads.rolling_memory.emplace(PairKey{dc.contact.id_i, dc.contact.id_j}, rolling[k]);

    const double cap = mat.friction * dc.normal_force.norm();
    const double ft = dc.tangential_force.norm();
    if (cap > 0.0) loads.max_friction_ratio = std::max(loads.max_friction_ratio, ft / cap);
    if (ft > cap * (1.0 + 1e-12) + 1e-300) ++loads.friction_violations;
  }
  for (std::size_t i = 0; i < ps.size(); ++i) loads.moment[i] = ps[i].orientation.conjugate() * loads.moment[i];
  return loads;
}

void central_difference_step(DemState& state, Loads&& loads, const DemConfig& config, double dt) {
  const bool first = state.step == 0;
  const double g = config.gravity.norm();
  const double speed_limit =
      g > 0.0 ? 10.0 * std::sqrt(2.0 * g * std::max(state.domain_height, 1e-12)) : std::numeric_limits<double>::infinity();

  for (std::size_t i = 0; i < state.particles.size(); ++i) {
    Particle& p = state.particles[i];
    Vec3& v = state.velocities[i];
    Vec3& w = state.angular_velocities[i];
    const Vec3 a = loads.force[i] / p.mass();
    v += (first ? 0.5 * dt : dt) * a;
    p.position += v * dt;

    const Mat3& inertia = p.props.inertia;
    const Vec3& moment = loads.moment[i];
    auto wdot = [&](const Vec3& omega) -> Vec3 {
      return inertia.ldlt().solve(moment - omega.cross(inertia * omega));
    };
    if (first) {
      w += 0.5 * dt * wdot(w);
    } else {
      const Vec3 mid = w + 0.5 * dt * wdot(w);
      w += dt * wdot(mid);
    }
    const double rate = w.norm();
    if (rate > 0.0) {
      p.orientation = p.orientation * Orientation(Eigen::AngleAxisd(rate * dt, w / rate));
      p.orientation.normalize();
    }
    if (!v.allFinite() || !w.allFinite() || v.norm() > speed_limit) {
      throw Error("INSTABILITY_DETECTED", "particle " + std::to_string(p.id) + " speed " + std::to_string(v.norm()) +
                                              " exceeds the blow-up limit at step " + std::to_string(state.step));
    }
  }
  state.memory = std::move(loads.memory);
  state.rolling_memory = std::move(loads.rolling_memory);
  ++state.step;
  state.time += dt;
}

double kinetic_energy(const DemState& state) {
  double e = 0.0;
  for (std::size_t i = 0; i < state.particles.size(); ++i) {
    const Particle& p = state.particles[i];
    const Vec3& w = state.angular_velocities[i];
    e += 0.5 * p.mass() * state.velocities[i].squaredNorm() + 0.5 * w.dot(p.props.inertia * w);
  }
  return e;
}

double potential_energy(const DemState& state, const Vec3& gravity) {
  double e = 0.0;
  for (const auto& p : state.particles) e -= p.mass() * gravity.dot(p.position);
  return e;
}

double elastic_energy(std::span<const DemContact> contacts) {
  double e = 0.0;
  for (const auto& c : contacts) e += hertz_energy(c.physics, c.contact.depth);
  return e;
}

double total_mass(const DemState& state) {
  double m = 0.0;
  for (const auto& p : state.particles) m += p.mass();
  return m;
}

namespace {

TraceRow trace_row(const DemState& s, std::size_t n_contacts) {
  TraceRow row;
  row.step = s.step;
  row.time = s.time;
  row.kinetic_energy = kinetic_energy(s);
  for (const auto& v : s.velocities) row.max_speed = std::max(row.max_speed, v.norm());
  row.n_contacts = n_contacts;
  return row;
}

}  // namespace

DemResult simulate(DemState state, const Container& container, const DemConfig& config) {
  config.validate();
  container.validate();
  DemResult result;
  const double dt = resolve_dt(state.particles, config);
  result.dt = dt;
  const double mass = total_mass(state);

  long quiet = 0;
  while (state.step < config.max_steps) {
    Loads loads = resultant_loads(state, container, config, dt);
    result.friction_violations += loads.friction_violations;
    result.max_friction_ratio = std::max(result.max_friction_ratio, loads.max_friction_ratio);
    const std::size_t n_contacts = loads.contacts.size();
    central_difference_step(state, std::move(loads), config, dt);

    const double ke = kinetic_energy(state) / mass;
    quiet = ke < config.rest_ke_threshold ? quiet + 1 : 0;
    if (quiet >= config.rest_window) {
      result.at_rest = true;
      state.trace.push_back(trace_row(state, n_contacts));
      break;
    }
    if (state.step % config.trace_interval == 0) state.trace.push_back(trace_row(state, n_contacts));
  }

  const Loads final_loads = resultant_loads(state, container, config, dt);
  auto& snap = result.snapshot;
  snap.provenance = Provenance::Dem;
  snap.domain = DomainSpec::box(Vec3::Zero(), Vec3(container.width_x, container.width_y, state.domain_height));
  snap.particles = state.particles;
  snap.velocities = state.velocities;
  snap.angular_velocities = state.angular_velocities;
  for (const auto& c : final_loads.contacts) snap.contacts.push_back({c.contact, true, c.force()});
  snap.converged = result.at_rest;
  snap.iterations = static_cast<std::uint64_t>(state.step);
  result.state = std::move(state);
  return result;
}

DemResult run_deposition(std::vector<Particle> assembly, const DemConfig& config, const Container& container) {
  config.validate();
  return simulate(initial_fill(std::move(assembly), container, config.seed), container, config);
}

void write_trace_csv(std::ostream& out, std::span<const TraceRow> trace) {
  out << "step,time,kinetic_energy,max_speed,n_contacts\n";
  out << std::setprecision(17);
  for (const auto& r : trace) {
    out << r.step << ',' << r.time << ',' << r.kinetic_energy << ',' << r.max_speed << ',' << r.n_contacts << '\n';
  }
}

}  // namespace granpack
