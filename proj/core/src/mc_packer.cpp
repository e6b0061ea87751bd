#include "granpack/mc_packer.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "granpack/broad_phase.hpp"
#include "granpack/errors.hpp"
#include "granpack/parallel.hpp"
#include "granpack/rng.hpp"

namespace granpack {

void McConfig::validate() const {
  if (!(phi0 > 0.0 && phi0 <= 1.0)) throw ConfigError("mc.phi0", "must lie in (0, 1]");
  if (!(tolerance > 0.0)) throw ConfigError("mc.tolerance", "must be > 0");
  if (max_iterations < 1) throw ConfigError("mc.max_iterations", "must be >= 1");
  if (!(rotation_scale >= 0.0)) throw ConfigError("mc.rotation_scale", "must be >= 0");
  if (stall_window < 1) throw ConfigError("mc.stall_window", "must be >= 1");
  if (growth_window < 1) throw ConfigError("mc.growth_window", "must be >= 1");
  if (!(stall_gain >= 1.0)) throw ConfigError("mc.stall_gain", "must be >= 1");
  if (!(max_gain >= 1.0)) throw ConfigError("mc.max_gain", "must be >= 1");
  if (!(growth_rate > 0.0)) throw ConfigError("mc.growth_rate", "must be > 0");
  if (!(max_growth_step > 0.0)) throw ConfigError("mc.max_growth_step", "must be > 0");
}

double initial_domain(std::span<const Particle> assembly, double phi0) {
  if (assembly.empty()) throw std::invalid_argument("initial_domain requires a non-empty assembly");
  if (!(phi0 > 0.0)) throw std::invalid_argument("initial_domain requires phi0 > 0");
  double total = 0.0;
  for (const auto& p : assembly) total += p.shape.volume();
  return std::cbrt(total / phi0);
}

McState initial_placement(std::vector<Particle> assembly, double edge, std::uint64_t seed) {
  SplitMix64 rng(derive_seed(seed, 0x4d43));
  for (auto& p : assembly) {
    p.position = Vec3(rng.uniform(0.0, edge), rng.uniform(0.0, edge), rng.uniform(0.0, edge));
    p.orientation = rng.orientation();
  }
  McState state;
  state.particles = std::move(assembly);
  state.domain_edge = edge;
  return state;
}

std::pair<Vec3, Vec3> pair_move(const Contact& c, const Particle& p_i, const Particle& p_j) {
  const Vec3 t = p_i.mass() / (p_i.mass() + p_j.mass()) * c.delta;
  const Vec3 d = c.point_i - p_i.position;
  return {t, d.cross(t)};
}

std::pair<Vec3, Vec3> wall_move(const Contact& c, const Particle& p) {
  const Vec3 d = c.point_i - p.position;
  return {c.delta, d.cross(c.delta)};
}

DomainSpec mc_domain(const McState& state, Boundary boundary) {
  if (boundary == Boundary::Periodic) return DomainSpec::periodic(state.domain_edge);
  return DomainSpec::box(Vec3::Zero(), Vec3::Constant(state.domain_edge));
}

std::vector<Plane> mc_walls(double edge) {
  return {
      {Vec3::Zero(), Vec3::UnitX(), kWallXMinId},
      {Vec3::Constant(edge), -Vec3::UnitX(), kWallXMaxId},
      {Vec3::Zero(), Vec3::UnitY(), kWallYMinId},
      {Vec3::Constant(edge), -Vec3::UnitY(), kWallYMaxId},
      {Vec3::Zero(), Vec3::UnitZ(), kWallZMinId},
      {Vec3::Constant(edge), -Vec3::UnitZ(), kWallZMaxId},
  };
}

std::vector<McContact> collect_contacts(const McState& state, const McConfig& config) {
  const auto& ps = state.particles;
  const DomainSpec domain = mc_domain(state, config.boundary);
  const auto pairs = broad_phase(ps, domain);

  std::vector<std::optional<McContact>> slots(pairs.size());
  parallel_for(pairs.size(), config.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto& cp = pairs[k];
      const Particle& a = ps[static_cast<std::size_t>(cp.i)];
      std::optional<Contact> c;
      auto call = [&](const Particle& b) {
        try {
          c = detect_contact(a, b);
        } catch (const ContactNonConvergence& e) {
          c = e.last_iterate();
        }
      };
      if (cp.shift.isZero()) {
        call(ps[static_cast<std::size_t>(cp.j)]);
      } else {
        Particle image = ps[static_cast<std::size_t>(cp.j)];
        image.position += cp.shift;
        call(image);
      }
      if (c) slots[k] = McContact{cp.i, cp.j, *c, relative_overlap(*c, a, ps[static_cast<std::size_t>(cp.j)]), cp.shift};
    }
  });

  std::vector<McContact> out;
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  if (config.boundary == Boundary::HardWalls) {
    const auto walls = mc_walls(state.domain_edge);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      for (const auto& w : walls) {
        if (auto c = detect_wall_contact(ps[i], w)) {
          out.push_back(McContact{static_cast<int>(i), -1, *c, relative_overlap(*c, ps[i]), Vec3::Zero()});
        }
      }
    }
  }
  return out;
}

std::vector<Move> aggregate_moves(const McState& state, std::span<const McContact> contacts,
                                  const McConfig& config) {
  const auto& ps = state.particles;
  std::vector<Move> moves(ps.size());
  std::vector<int> counts(ps.size(), 0);
  for (const auto& mc : contacts) {
    const auto i = static_cast<std::size_t>(mc.i);
    if (mc.j < 0) {
      const auto [t, r] = wall_move(mc.contact, ps[i]);
      moves[i].translation += t;
      moves[i].rotation += r;
      ++counts[i];
      continue;
    }
    const auto j = static_cast<std::size_t>(mc.j);
    {
      const auto [t, r] = pair_move(mc.contact, ps[i], ps[j]);
      moves[i].translation += t;
      moves[i].rotation += r;
    }
    {
      // j's contact point was found on the image at ps[j].position + shift.
      Particle image = ps[j];
      image.position += mc.shift;
      const auto [t, r] = pair_move(mc.contact.swapped(), image, ps[i]);
      moves[j].translation += t;
      moves[j].rotation += r;
    }
    ++counts[i];
    ++counts[j];
  }
  if (config.average_moves) {
    for (std::size_t i = 0; i < moves.size(); ++i) {
      if (counts[i] > 1) {
        moves[i].translation /= counts[i];
        moves[i].rotation /= counts[i];
      }
    }
  }
  return moves;
}

void apply_moves(McState& state, std::span<const Move> moves, const McConfig& config) {
  const double edge = state.domain_edge;
  for (std::size_t i = 0; i < state.particles.size(); ++i) {
    Particle& p = state.particles[i];
    const Move& m = moves[i];
    p.position += state.translation_gain * m.translation;
    const double rnorm = m.rotation.norm();
    if (rnorm > 0.0 && config.rotation_scale > 0.0) {
      const double req = p.shape.equivalent_radius();
      const double angle = config.rotation_scale * rnorm / (req * req);
      p.orientation = Orientation(Eigen::AngleAxisd(angle, m.rotation / rnorm)) * p.orientation;
      p.orientation.normalize();
    }
    for (int k = 0; k < 3; ++k) {
      if (config.boundary == Boundary::Periodic) {
        p.position[k] -= edge * std::floor(p.position[k] / edge);
        if (p.position[k] >= edge) p.position[k] -= edge;
      } else {
        p.position[k] = std::clamp(p.position[k], 0.0, edge);
      }
    }
  }
}

namespace {

void grow_domain(McState& state, double factor) {
  state.domain_edge *= factor;
  for (auto& p : state.particles) p.position *= factor;
}

}  // namespace

McResult run(std::vector<Particle> assembly, const McConfig& config) {
  config.validate();
  const double edge = initial_domain(assembly, config.phi0);
  McState state = initial_placement(std::move(assembly), edge, config.seed);

  bool converged = false;
  std::vector<McContact> contacts;
  double stall_reference = -1.0;
  double growth_reference = -1.0;
  for (;;) {
    contacts = collect_contacts(state, config);
    double sum = 0.0, worst = 0.0;
    for (const auto& c : contacts) {
      sum += c.relative;
      worst = std::max(worst, c.relative);
    }
    const double mean = contacts.empty() ? 0.0 : sum / static_cast<double>(contacts.size());
    state.mean_relative_overlap = mean;
    state.history.push_back({state.iteration, mean, worst, contacts.size(), state.domain_edge});

    if (mean <= config.tolerance && worst <= 10.0 * config.tolerance) {
      converged = true;
      break;
    }
    if (state.iteration >= config.max_iterations) break;

    if (state.iteration > 0 && state.iteration % config.stall_window == 0) {
      if (stall_reference > 0.0 && mean > (1.0 - config.stall_improvement) * stall_reference) {
        state.translation_gain = std::min(state.translation_gain * config.stall_gain, config.max_gain);
      }
      stall_reference = mean;
    }
    if (config.domain_growth && state.iteration > 0 && state.iteration % config.growth_window == 0) {
      // Relaxation that no longer halves the overlap within a window is jammed
      // at the current density.
      if (growth_reference > 0.0 && mean > 0.5 * growth_reference) {
        grow_domain(state, 1.0 + std::min(config.growth_rate * mean, config.max_growth_step));
        contacts = collect_contacts(state, config);
      }
      growth_reference = mean;
    }

    const auto moves = aggregate_moves(state, contacts, config);
    apply_moves(state, moves, config);
    ++state.iteration;
  }

  McResult result;
  result.converged = converged;
  auto& snap = result.snapshot;
  snap.provenance = Provenance::MonteCarlo;
  snap.domain = mc_domain(state, config.boundary);
  snap.particles = state.particles;
  snap.converged = converged;
  snap.iterations = static_cast<std::uint64_t>(state.iteration);
  for (const auto& c : contacts) snap.contacts.push_back({c.contact, false, Vec3::Zero()});
  result.state = std::move(state);
  return result;
}

}  // namespace granpack
