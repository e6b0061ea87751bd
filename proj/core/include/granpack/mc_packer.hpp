#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "granpack/contact.hpp"
#include "granpack/snapshot.hpp"

namespace granpack {

enum class Boundary : std::uint32_t { Periodic = 0, HardWalls = 1 };

struct McConfig {
  double phi0 = 0.86;
  // Convergence: contact-mean relative overlap <= tolerance and every
  // relative overlap <= 10 * tolerance.
  double tolerance = 1e-4;
  long max_iterations = 100000;
  // Rotation angle = rotation_scale * |R_i| / r_eq^2.
  double rotation_scale = 1.0;
  Boundary boundary = Boundary::Periodic;
  std::uint64_t seed = 0;
  // Divide T_i and R_i by the particle's contact count.
  bool average_moves = false;
  // Stall guard: every stall_window iterations, if the mean overlap improved
  // by less than stall_improvement (relative), translation moves are scaled
  // up by stall_gain (capped at max_gain) and, with domain_growth, the domain
  // expands affinely by growth_rate * mean overlap (capped at max_growth_step).
  long stall_window = 500;
  double stall_improvement = 1e-3;
  double stall_gain = 1.1;
  double max_gain = 2.0;
  bool domain_growth = true;
  long growth_window = 50;
  double growth_rate = 1.0;
  double max_growth_step = 0.01;
  int threads = 1;

  void validate() const;
};

struct McHistoryRow {
  long iteration = 0;
  double mean_rel_overlap = 0.0;
  double max_rel_overlap = 0.0;
  std::size_t n_contacts = 0;
  double domain_edge = 0.0;
};

struct McState {
  std::vector<Particle> particles;
  double domain_edge = 0.0;
  long iteration = 0;
  double mean_relative_overlap = 0.0;
  double translation_gain = 1.0;
  std::vector<McHistoryRow> history;
};

// Contact between state.particles[i] and state.particles[j]; j < 0 is a wall.
struct McContact {
  int i = 0;
  int j = -1;
  Contact contact;
  double relative = 0.0;
  // Periodic image offset applied to particle j when the contact was found.
  Vec3 shift = Vec3::Zero();
};

struct Move {
  Vec3 translation = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();
};

// L0 = (sum v_i / phi0)^(1/3).
double initial_domain(std::span<const Particle> assembly, double phi0);

// Uniform centroids in [0, L0)^3 and uniform random orientations.
McState initial_placement(std::vector<Particle> assembly, double edge, std::uint64_t seed);

// t_ij = m_i / (m_i + m_j) * delta and r_ij = d_i x t_ij, d_i = point_i - centroid_i.
std::pair<Vec3, Vec3> pair_move(const Contact& c, const Particle& p_i, const Particle& p_j);
// Walls are immovable: the particle takes the whole overlap vector.
std::pair<Vec3, Vec3> wall_move(const Contact& c, const Particle& p);

DomainSpec mc_domain(const McState& state, Boundary boundary);
std::vector<Plane> mc_walls(double edge);

// All overlapping pairs (and wall contacts in HardWalls mode), ordered by pair.
std::vector<McContact> collect_contacts(const McState& state, const McConfig& config);

std::vector<Move> aggregate_moves(const McState& state, std::span<const McContact> contacts,
                                  const McConfig& config);

// Jacobi update: all moves come from the pre-move state.
void apply_moves(McState& state, std::span<const Move> moves, const McConfig& config);

struct McResult {
  PackingSnapshot snapshot;
  McState state;
  bool converged = false;
};

// Relaxes the assembly until convergence or max_iterations. A run that hits
// the iteration limit is returned with converged == false.
McResult run(std::vector<Particle> assembly, const McConfig& config);

}  // namespace granpack
