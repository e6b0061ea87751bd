#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "granpack/snapshot.hpp"

namespace granpack {

struct Region {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  double volume() const { return (hi - lo).cwiseMax(0.0).prod(); }
};

// Full cube for periodic snapshots. Containers use the full cross-section
// between 0.5 d_max above the floor and 2 d_max below the free surface.
Region default_region(const PackingSnapshot& s);
// 99th percentile of the particles' highest points.
double free_surface_height(const PackingSnapshot& s);

// Particle volume inside `region`, estimated from `samples` stratified points
// when the particle straddles the boundary.
double volume_in_region(const Particle& p, const Region& region, std::uint64_t seed, int samples);

double packing_fraction(const PackingSnapshot& s, const std::optional<Region>& region = std::nullopt,
                        int samples_per_particle = 100000);

struct Coordination {
  double mean = 0.0;
  double tolerance = 0.0;
  std::vector<int> per_particle;
  // count of particles keyed by contact number
  std::map<int, std::size_t> histogram;
};

// Default gap tolerance: 1e-3 times the mean volume-equivalent radius.
double default_contact_tolerance(const PackingSnapshot& s);

struct GeometricContact {
  int i = 0;
  int j = 0;
  Vec3 normal = Vec3::UnitX();
};

// Particle pairs whose surfaces are closer than `tolerance` (walls excluded).
std::vector<GeometricContact> geometric_contacts(const PackingSnapshot& s, double tolerance);

Coordination coordination_number(const PackingSnapshot& s, double tolerance);

struct RdfCurve {
  std::vector<double> r;
  std::vector<double> g;
  double bin_width = 0.0;
  double r_max = 0.0;
  // Set when fewer than five pairs per bin are expected at r_max.
  std::optional<std::string> warning;
};

RdfCurve rdf(const PackingSnapshot& s, double bin_width, double r_max);

// (1 / N_c) sum n (x) n over contact normals.
Mat3 fabric_tensor(std::span<const Vec3> normals);
Mat3 fabric_tensor(const PackingSnapshot& s, double tolerance);

struct ForceChain {
  std::vector<std::int64_t> particles;
  double mean_force = 0.0;
};

struct ForceEdge {
  std::int64_t a = 0;
  std::int64_t b = 0;
  double normal_force = 0.0;
};

struct ForceChainGraph {
  double mean_normal_force = 0.0;
  double threshold = 0.0;
  std::vector<std::int64_t> nodes;
  std::vector<ForceEdge> edges;
  std::vector<ForceChain> chains;
};

// Greedy extraction: starting from the strongest unassigned strong contact,
// a chain grows at both ends through strong contacts whose branch vectors
// turn by less than angle_limit_deg. Chains with fewer than three particles
// are dropped.
ForceChainGraph force_chains(const PackingSnapshot& s, double force_factor = 1.0, double angle_limit_deg = 45.0);

struct WallReactions {
  double floor_z = 0.0;
  // z-component of all wall forces, floor included.
  double total_z = 0.0;
};
WallReactions wall_reactions(const PackingSnapshot& s);

struct MetricsConfig {
  // Unset values are derived from the snapshot: tolerance 1e-3 r_mean,
  // bin width 0.05 r_mean, r_max 8 r_mean (capped at L / 2 when periodic).
  std::optional<double> contact_tolerance;
  std::optional<double> rdf_bin_width;
  std::optional<double> rdf_r_max;
  double force_factor = 1.0;
  double angle_limit_deg = 45.0;
  int samples_per_particle = 100000;
  std::optional<Region> region;
  void validate() const;
};

struct PackingMetrics {
  Provenance provenance = Provenance::Assembly;
  std::size_t n_particles = 0;
  Region region;
  double packing_fraction = 0.0;
  Coordination coordination;
  RdfCurve rdf;
  Mat3 fabric = Mat3::Zero();
  std::size_t n_fabric_contacts = 0;
  std::optional<ForceChainGraph> chains;
  std::optional<WallReactions> reactions;
};

// Fills every unset tolerance and RDF setting from the snapshot.
MetricsConfig resolved_settings(const MetricsConfig& config, const PackingSnapshot& s);
// Common settings for two snapshots: the smaller of each derived value, so
// both RDFs share one binning.
MetricsConfig shared_settings(const MetricsConfig& config, const PackingSnapshot& a, const PackingSnapshot& b);

PackingMetrics compute_metrics(const PackingSnapshot& s, const MetricsConfig& config);

nlohmann::json to_json(const PackingMetrics& m);
std::string rdf_csv(const RdfCurve& curve);
std::string cn_histogram_csv(const Coordination& cn);

struct Comparison {
  double delta_fraction = 0.0;
  double delta_cn = 0.0;
  double rdf_l2 = 0.0;
  double fabric_deviatoric = 0.0;
  std::optional<double> delta_chain_count;
  std::optional<double> delta_chain_mean_length;
};

// Discrete L2 distance sqrt(sum (g_a - g_b)^2 * dr). Throws
// INCOMPATIBLE_BINNING when the curves use different bins.
double rdf_l2_distance(const RdfCurve& a, const RdfCurve& b);
// Frobenius norm of the difference of the deviatoric parts.
double fabric_deviatoric_distance(const Mat3& a, const Mat3& b);

// Deltas are a - b.
Comparison compare(const PackingMetrics& a, const PackingMetrics& b);
nlohmann::json comparison_json(const PackingMetrics& a, const PackingMetrics& b, const Comparison& c);
std::string comparison_table(const PackingMetrics& a, const PackingMetrics& b, const Comparison& c);

}  // namespace granpack
