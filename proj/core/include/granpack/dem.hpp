#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "granpack/contact.hpp"
#include "granpack/snapshot.hpp"

namespace granpack {

struct Material {
  double youngs_modulus = 1e8;
  double poisson_ratio = 0.3;
  double friction = 0.5;
  // Viscous contact damping ratio.
  double damping = 0.3;
  // Rolling and twisting resistance: elastic-plastic spring-dashpot on the
  // relative rotation, limited to rolling_friction * R* * |F_n|. Zero disables it.
  double rolling_friction = 0.1;
  double rolling_damping = 0.3;

  double shear_modulus() const { return youngs_modulus / (2.0 * (1.0 + poisson_ratio)); }
  // Two-body effective moduli for identical materials.
  double effective_youngs() const;
  double effective_shear() const;
  void validate() const;
};

// Open-top box [0, width_x] x [0, width_y] with its floor at z = 0.
struct Container {
  double width_x = 20.0;
  double width_y = 20.0;

  std::vector<Plane> walls() const;
  void validate() const;
};

struct DemConfig {
  Material material;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  // <= 0 selects the automatic step.
  double dt = 0.0;
  double rest_ke_threshold = 1e-6;
  long rest_window = 1000;
  long max_steps = 2000000;
  std::uint64_t seed = 0;
  int threads = 1;
  // Trace rows are emitted every trace_interval steps.
  long trace_interval = 100;
  void validate() const;
};

// Per-contact effective quantities.
struct ContactPhysics {
  double e_star = 0.0;
  double g_star = 0.0;
  double r_star = 0.0;
  double m_star = 0.0;
  // Effective rotational inertia about the contact point.
  double i_star = 0.0;
};

// Contact memory key: (id_i, id_j) as stored in the contact.
using PairKey = std::pair<std::int64_t, std::int64_t>;
using TangentialMemory = std::map<PairKey, Vec3>;

struct TraceRow {
  long step = 0;
  double time = 0.0;
  double kinetic_energy = 0.0;
  double max_speed = 0.0;
  std::size_t n_contacts = 0;
};

struct DemState {
  std::vector<Particle> particles;
  // Translational velocities are world-frame, angular velocities body-frame.
  // Between steps both are the half-step values of the leapfrog scheme.
  std::vector<Vec3> velocities;
  std::vector<Vec3> angular_velocities;
  TangentialMemory memory;
  // Spring part of the rolling and twisting resistance moment on i.
  TangentialMemory rolling_memory;
  long step = 0;
  double time = 0.0;
  // Column height used by the blow-up guard.
  double domain_height = 1.0;
  std::vector<TraceRow> trace;
};

// A particle-particle or particle-wall contact together with the force it
// exerts on particle i.
struct DemContact {
  int i = 0;
  // Index of particle j, or -1 for a wall.
  int j = -1;
  Contact contact;
  ContactPhysics physics;
  Vec3 normal_force = Vec3::Zero();
  Vec3 tangential_force = Vec3::Zero();
  // Resistance couple on i (world frame); j receives the opposite couple.
  Vec3 rolling_moment = Vec3::Zero();
  Vec3 force() const { return normal_force + tangential_force; }
};

struct Loads {
  std::vector<Vec3> force;
  // Body-frame moments about the centroid.
  std::vector<Vec3> moment;
  std::vector<DemContact> contacts;
  TangentialMemory memory;
  TangentialMemory rolling_memory;
  // Largest |F_t| / (mu |F_n|) over contacts with mu > 0.
  double max_friction_ratio = 0.0;
  long friction_violations = 0;
};

ContactPhysics contact_physics(const Contact& c, const Particle& p_i, const Particle* p_j, const Material& m);

// Hertz force on particle i. `approach_speed` is the relative normal velocity
// of i towards j (positive when closing).
Vec3 hertz_normal_force(const Contact& c, const ContactPhysics& phys, const Material& m, double approach_speed);

// Mindlin tangential force on particle i. `memory` holds the tangential force
// of the previous step; it is rotated into the current tangent plane,
// advanced by -k_t v_t dt and clipped to the Coulomb limit.
Vec3 mindlin_tangential_force(const Contact& c, const ContactPhysics& phys, const Material& m,
                              double normal_force, Vec3& memory, const Vec3& tangential_velocity, double dt);

// Rolling and twisting resistance couple on particle i. `relative_spin` is
// omega_i - omega_j in world frame. `memory` holds the spring couple of the
// previous step; it is advanced by -k_r omega dt with
// k_r = 2.25 mu_r^2 R*^2 k_n, and its rolling and twisting parts are each
// clipped to mu_r R* |F_n|. Viscous damping acts only on unsaturated parts.
Vec3 rolling_resistance_moment(const Contact& c, const ContactPhysics& phys, const Material& m, double normal_force,
                               Vec3& memory, const Vec3& relative_spin, double dt);

// Hertz spring stiffness dF/d(depth) = 2 E* sqrt(R* depth).
double hertz_stiffness(const ContactPhysics& phys, double depth);
// Elastic energy stored at a Hertz contact, (8/15) E* sqrt(R*) depth^(5/2).
double hertz_energy(const ContactPhysics& phys, double depth);
// Depth at which a sphere of the given mass rests on the floor.
double equilibrium_depth(const ContactPhysics& phys, double weight);

// dt = 0.2 sqrt(m_min / k_max), k_max at depth 1e-3 r_min against a wall.
double auto_timestep(std::span<const Particle> particles, const Material& m);
double resolve_dt(std::span<const Particle> particles, const DemConfig& config);

// Places the assembly on a jittered shelf grid above the floor with no
// contacts. Throws FILL_OVERFLOW when the column would exceed ten times the
// dense packing height.
DemState initial_fill(std::vector<Particle> assembly, const Container& container, std::uint64_t seed);

std::vector<DemContact> find_contacts(const DemState& state, const Container& container, const DemConfig& config);

Loads resultant_loads(const DemState& state, const Container& container, const DemConfig& config, double dt);

// Leapfrog update. The first step applies a half kick from the initial
// velocities. Commits the tangential memory from `loads`.
void central_difference_step(DemState& state, Loads&& loads, const DemConfig& config, double dt);

double kinetic_energy(const DemState& state);
double potential_energy(const DemState& state, const Vec3& gravity);
double elastic_energy(std::span<const DemContact> contacts);
double total_mass(const DemState& state);

struct DemResult {
  PackingSnapshot snapshot;
  DemState state;
  bool at_rest = false;
  double dt = 0.0;
  long friction_violations = 0;
  double max_friction_ratio = 0.0;
};

// Steps until kinetic energy per unit mass stays below rest_ke_threshold for
// rest_window consecutive steps or max_steps is reached.
DemResult simulate(DemState state, const Container& container, const DemConfig& config);
DemResult run_deposition(std::vector<Particle> assembly, const DemConfig& config, const Container& container);

void write_trace_csv(std::ostream& out, std::span<const TraceRow> trace);

}  // namespace granpack
