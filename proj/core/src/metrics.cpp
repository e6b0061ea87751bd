#include "granpack/metrics.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "granpack/broad_phase.hpp"
#include "granpack/errors.hpp"
#include "granpack/rng.hpp"

namespace granpack {

namespace {

double mean_equivalent_radius(const PackingSnapshot& s) {
  if (s.particles.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : s.particles) sum += p.shape.equivalent_radius();
  return sum / static_cast<double>(s.particles.size());
}

double max_diameter(const PackingSnapshot& s) {
  double d = 0.0;
  for (const auto& p : s.particles) d = std::max(d, 2.0 * p.shape.bounding_radius());
  return d;
}

double top_height(const Particle& p) {
  return p.to_world(p.shape.support(p.orientation.conjugate() * Vec3::UnitZ())).z();
}

Vec3 branch(const PackingSnapshot& s, const Vec3& from, const Vec3& to) {
  const Vec3 d = to - from;
  return s.domain.is_periodic() ? minimum_image(d, s.domain.edge()) : d;
}

bool inside(const Region& r, const Vec3& x) {
  return (x.array() >= r.lo.array()).all() && (x.array() < r.hi.array()).all();
}

// Box used to normalise container RDFs: the domain cross-section up to the
// free surface, or the centroid bounding box for open snapshots.
Region rdf_box(const PackingSnapshot& s) {
  Region box;
  if (s.domain.kind == DomainKind::Box) {
    box.lo = s.domain.lo;
    box.hi = s.domain.hi;
    box.hi.z() = std::min(box.hi.z(), free_surface_height(s));
  } else {
    box.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    box.hi = -box.lo;
    for (const auto& p : s.particles) {
      box.lo = box.lo.cwiseMin(p.position);
      box.hi = box.hi.cwiseMax(p.position);
    }
  }
  return box;
}

std::vector<Vec3> fibonacci_directions(int n) {
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(n));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < n; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / n;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    dirs.emplace_back(rho * std::cos(golden * k), rho * std::sin(golden * k), z);
  }
  return dirs;
}

}  // namespace

double free_surface_height(const PackingSnapshot& s) {
  if (s.particles.empty()) return 0.0;
  std::vector<double> tops;
  tops.reserve(s.particles.size());
  for (const auto& p : s.particles) tops.push_back(top_height(p));
  std::sort(tops.begin(), tops.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(tops.size())));
  return tops[std::max<std::size_t>(rank, 1) - 1];
}

Region default_region(const PackingSnapshot& s) {
  Region r;
  if (s.domain.is_periodic()) {
    r.lo = s.domain.lo;
    r.hi = s.domain.hi;
    return r;
  }
  const double d = max_diameter(s);
  if (s.domain.kind == DomainKind::Box) {
    r.lo = s.domain.lo;
    r.hi = s.domain.hi;
  } else {
    r.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    r.hi = -r.lo;
    for (const auto& p : s.particles) {
      const Vec3 ext = Vec3::Constant(p.shape.bounding_radius());
      r.lo = r.lo.cwiseMin(p.position - ext);
      r.hi = r.hi.cwiseMax(p.position + ext);
    }
  }
  r.lo.z() += 0.5 * d;
  r.hi.z() = free_surface_height(s) - 2.0 * d;
  return r;
}

double volume_in_region(const Particle& p, const Region& region, std::uint64_t seed, int samples) {
  const double br = p.shape.bounding_radius();
  const Vec3 ext = Vec3::Constant(br);
  const Vec3 lo = p.position - ext, hi = p.position + ext;
  if ((lo.array() >= region.lo.array()).all() && (hi.array() <= region.hi.array()).all()) return p.shape.volume();
  if ((hi.array() <= region.lo.array()).any() || (lo.array() >= region.hi.array()).any()) return 0.0;

  const ParticleShape& shape = p.shape;
  const Vec3 box_lo(-shape.semi(0, true), -shape.semi(1, true), -shape.semi(2, true));
  const Vec3 box_hi(shape.semi(0, false), shape.semi(1, false), shape.semi(2, false));
  const int m = std::max(2, static_cast<int>(std::ceil(std::cbrt(static_cast<double>(samples)))));
  const Vec3 cell = (box_hi - box_lo) / m;
  SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(p.id)));
  long in_body = 0, in_both = 0;
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      for (int c = 0; c < m; ++c) {
        const Vec3 local = box_lo + Vec3((a + rng.uniform()) * cell.x(), (b + rng.uniform()) * cell.y(),
                                         (c + rng.uniform()) * cell.z());
        if (shape.implicit(local) >= 1.0) continue;
        ++in_body;
        if (inside(region, p.to_world(local))) ++in_both;
      }
    }
  }
  if (in_body == 0) return 0.0;
  return shape.volume() * static_cast<double>(in_both) / static_cast<double>(in_body);
}

double packing_fraction(const PackingSnapshot& s, const std::optional<Region>& region, int samples_per_particle) {
  const Region r = region ? *region : default_region(s);
  const double vol = r.volume();
  if (!(vol > 0.0)) throw Error("EMPTY_REGION", "measurement region has no volume");
  // Periodic images of every particle tile the full cell exactly once.
  if (s.domain.is_periodic() && r.lo == s.domain.lo && r.hi == s.domain.hi) {
    double total = 0.0;
    for (const auto& p : s.particles) total += p.shape.volume();
    return total / vol;
  }
  const std::uint64_t seed = snapshot_hash(s);
  double total = 0.0;
  for (const auto& p : s.particles) total += volume_in_region(p, r, seed, samples_per_particle);
  return total / vol;
}

double default_contact_tolerance(const PackingSnapshot& s) { return 1e-3 * mean_equivalent_radius(s); }

std::vector<GeometricContact> geometric_contacts(const PackingSnapshot& s, double tolerance) {
  if (!(tolerance >= 0.0)) throw std::invalid_argument("contact tolerance must be >= 0");
  std::vector<Particle> grown;
  grown.reserve(s.particles.size());
  for (const auto& p : s.particles) {
    if (tolerance == 0.0) {
      grown.push_back(p);
      continue;
    }
    Particle q = p;
    q.shape = p.shape.inflated(0.5 * tolerance);
    q.props = inertia(q.shape, p.density);
    q.position = p.junction() + p.orientation * q.props.centroid_offset;
    grown.push_back(std::move(q));
  }
  const DomainSpec domain = s.domain.is_periodic() ? s.domain : DomainSpec::open();
  std::vector<GeometricContact> out;
  for (const auto& cp : broad_phase(grown, domain)) {
    Particle b = grown[static_cast<std::size_t>(cp.j)];
    b.position += cp.shift;
    std::optional<Contact> c;
    try {
      c = detect_contact(grown[static_cast<std::size_t>(cp.i)], b);
    } catch (const ContactNonConvergence& e) {
      c = e.last_iterate();
    }
    if (c) out.push_back({cp.i, cp.j, c->normal});
  }
  return out;
}

Coordination coordination_number(const PackingSnapshot& s, double tolerance) {
  Coordination cn;
  cn.tolerance = tolerance;
  cn.per_particle.assign(s.particles.size(), 0);
  for (const auto& c : geometric_contacts(s, tolerance)) {
    ++cn.per_particle[static_cast<std::size_t>(c.i)];
    ++cn.per_particle[static_cast<std::size_t>(c.j)];
  }
  long total = 0;
  for (int k : cn.per_particle) {
    total += k;
    ++cn.histogram[k];
  }
  cn.mean = s.particles.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(s.particles.size());
  return cn;
}

RdfCurve rdf(const PackingSnapshot& s, double bin_width, double r_max) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("rdf bin width must be > 0");
  if (!(r_max >= bin_width)) throw std::invalid_argument("rdf r_max must be >= bin width");
  const bool periodic = s.domain.is_periodic();
  if (periodic && r_max > 0.5 * s.domain.edge() * (1.0 + 1e-12)) {
    throw Error("RDF_RANGE", "r_max exceeds half the periodic cell edge");
  }
  const auto bins = static_cast<std::size_t>(std::floor(r_max / bin_width + 1e-9));
  RdfCurve curve;
  curve.bin_width = bin_width;
  curve.r_max = static_cast<double>(bins) * bin_width;
  curve.r.resize(bins);
  curve.g.assign(bins, 0.0);
  for (std::size_t k = 0; k < bins; ++k) curve.r[k] = (static_cast<double>(k) + 0.5) * bin_width;

  const std::size_t n = s.particles.size();
  if (n < 2) return curve;
  std::vector<double> counts(bins, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = branch(s, s.particles[i].position, s.particles[j].position).norm();
      if (d >= curve.r_max) continue;
      const auto k = static_cast<std::size_t>(d / bin_width);
      if (k < bins) counts[k] += 2.0;
    }
  }

  double volume;
  std::vector<double> coverage(bins, static_cast<double>(n));
  if (periodic) {
    volume = std::pow(s.domain.edge(), 3);
  } else {
    const Region box = rdf_box(s);
    volume = box.volume();
    if (!(volume > 0.0)) throw Error("EMPTY_REGION", "rdf normalisation box has no volume");
    const auto dirs = fibonacci_directions(256);
    for (std::size_t k = 0; k < bins; ++k) {
      double sum = 0.0;
      for (const auto& p : s.particles) {
        int hits = 0;
        for (const auto& u : dirs) {
          const Vec3 x = p.position + curve.r[k] * u;
          if ((x.array() >= box.lo.array()).all() && (x.array() <= box.hi.array()).all()) ++hits;
        }
        sum += static_cast<double>(hits) / static_cast<double>(dirs.size());
      }
      coverage[k] = sum;
    }
  }
  const double rho = static_cast<double>(n) / volume;
  for (std::size_t k = 0; k < bins; ++k) {
    const double r0 = static_cast<double>(k) * bin_width, r1 = r0 + bin_width;
    const double shell = 4.0 / 3.0 * std::numbers::pi * (r1 * r1 * r1 - r0 * r0 * r0);
    const double expected = rho * shell * coverage[k];
    curve.g[k] = expected > 0.0 ? counts[k] / expected : 0.0;
  }
  const double at_edge = 0.5 * static_cast<double>(n) * rho * 4.0 * std::numbers::pi * curve.r_max * curve.r_max * bin_width;
  if (at_edge < 5.0) {
    std::ostringstream msg;
    msg << "BIN_TOO_FINE: " << at_edge << " expected pairs per bin at r_max";
    curve.warning = msg.str();
  }
  return curve;
}

Mat3 fabric_tensor(std::span<const Vec3> normals) {
  if (normals.empty()) throw Error("NO_CONTACTS", "fabric tensor needs at least one contact");
  Mat3 f = Mat3::Zero();
  for (const auto& n : normals) {
    const Vec3 u = n.normalized();
    f += u * u.transpose();
  }
  return f / static_cast<double>(normals.size());
}

Mat3 fabric_tensor(const PackingSnapshot& s, double tolerance) {
  std::vector<Vec3> normals;
  for (const auto& c : geometric_contacts(s, tolerance)) normals.push_back(c.normal);
  return fabric_tensor(normals);
}

ForceChainGraph force_chains(const PackingSnapshot& s, double force_factor, double angle_limit_deg) {
  if (!s.has_forces()) throw Error("REQUIRES_FORCES", "force chains need a snapshot with contact forces");
  if (!(force_factor >= 0.0)) throw std::invalid_argument("force_factor must be >= 0");

  std::map<std::int64_t, std::size_t> index;
  for (std::size_t k = 0; k < s.particles.size(); ++k) index[s.particles[k].id] = k;

  ForceChainGraph graph;
  std::vector<ForceEdge> all;
  for (const auto& rec : s.contacts) {
    if (!rec.has_force || is_wall(rec.contact.id_i) || is_wall(rec.contact.id_j)) continue;
    all.push_back({rec.contact.id_i, rec.contact.id_j, std::abs(rec.force.dot(rec.contact.normal))});
  }
  if (all.empty()) return graph;
  double sum = 0.0;
  for (const auto& e : all) sum += e.normal_force;
  graph.mean_normal_force = sum / static_cast<double>(all.size());
  graph.threshold = force_factor * graph.mean_normal_force;
  for (const auto& e : all) {
    if (e.normal_force >= graph.threshold) graph.edges.push_back(e);
  }
  std::set<std::int64_t> nodes;
  for (const auto& e : graph.edges) {
    nodes.insert(e.a);
    nodes.insert(e.b);
  }
  graph.nodes.assign(nodes.begin(), nodes.end());

  const auto& edges = graph.edges;
  std::vector<std::size_t> order(edges.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return edges[x].normal_force > edges[y].normal_force; });
  std::multimap<std::int64_t, std::size_t> incident;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    incident.emplace(edges[k].a, k);
    incident.emplace(edges[k].b, k);
  }
  auto position = [&](std::int64_t id) { return s.particles[index.at(id)].position; };
  const double cos_limit = std::cos(angle_limit_deg * std::numbers::pi / 180.0);

  std::vector<bool> used(edges.size(), false);
  for (std::size_t seed : order) {
    if (used[seed]) continue;
    std::vector<std::size_t> chain_edges{seed};
    used[seed] = true;
    std::deque<std::int64_t> path{edges[seed].a, edges[seed].b};
    auto extend = [&](bool at_back) {
      for (;;) {
        const std::int64_t cur = at_back ? path.back() : path.front();
        const std::int64_t prev = at_back ? path[path.size() - 2] : path[1];
        const Vec3 d_in = branch(s, position(prev), position(cur)).normalized();
        std::optional<std::size_t> best;
        std::int64_t best_node = 0;
        auto [lo, hi] = incident.equal_range(cur);
        for (auto it = lo; it != hi; ++it) {
          const std::size_t k = it->second;
          if (used[k]) continue;
          const std::int64_t other = edges[k].a == cur ? edges[k].b : edges[k].a;
          if (std::find(path.begin(), path.end(), other) != path.end()) continue;
          const Vec3 d_out = branch(s, position(cur), position(other)).normalized();
          if (d_in.dot(d_out) <= cos_limit) continue;
          if (!best || edges[k].normal_force > edges[*best].normal_force ||
              (edges[k].normal_force == edges[*best].normal_force && k < *best)) {
            best = k;
            best_node = other;
          }
        }
        if (!best) return;
        used[*best] = true;
        chain_edges.push_back(*best);
        if (at_back) {
          path.push_back(best_node);
        } else {
          path.push_front(best_node);
        }
      }
    };
    extend(true);
    extend(false);
    if (path.size() < 3) {
      // Too short to be a chain: free the edges for later chains except the seed.
      for (std::size_t k = 1; k < chain_edges.size(); ++k) used[chain_edges[k]] = false;
      continue;
    }
    ForceChain chain;
    chain.particles.assign(path.begin(), path.end());
    double f = 0.0;
    for (std::size_t k : chain_edges) f += edges[k].normal_force;
    chain.mean_force = f / static_cast<double>(chain_edges.size());
    graph.chains.push_back(std::move(chain));
  }
  return graph;
}

WallReactions wall_reactions(const PackingSnapshot& s) {
  WallReactions w;
  for (const auto& rec : s.contacts) {
    if (!rec.has_force || !is_wall(rec.contact.id_j)) continue;
    w.total_z += rec.force.z();
    if (rec.contact.id_j == kFloorId) w.floor_z += rec.force.z();
  }
  return w;
}

void MetricsConfig::validate() const {
  if (contact_tolerance && !(*contact_tolerance >= 0.0)) {
    throw ConfigError("metrics.contact_tolerance", "must be >= 0");
  }
  if (rdf_bin_width && !(*rdf_bin_width > 0.0)) throw ConfigError("metrics.rdf_bin_width", "must be > 0");
  if (rdf_r_max && !(*rdf_r_max > 0.0)) throw ConfigError("metrics.rdf_r_max", "must be > 0");
  if (rdf_bin_width && rdf_r_max && *rdf_r_max < *rdf_bin_width) {
    throw ConfigError("metrics.rdf_r_max", "must be >= rdf_bin_width");
  }
  if (!(force_factor >= 0.0)) throw ConfigError("metrics.force_factor", "must be >= 0");
  if (!(angle_limit_deg > 0.0 && angle_limit_deg <= 180.0)) {
    throw ConfigError("metrics.angle_limit_deg", "must lie in (0, 180]");
  }
  if (samples_per_particle < 8) throw ConfigError("metrics.samples_per_particle", "must be >= 8");
  if (region && !(region->volume() > 0.0)) throw ConfigError("metrics.region", "must have positive volume");
}

MetricsConfig resolved_settings(const MetricsConfig& config, const PackingSnapshot& s) {
  MetricsConfig out = config;
  const double r_mean = mean_equivalent_radius(s);
  if (!out.contact_tolerance) out.contact_tolerance = 1e-3 * r_mean;
  if (!out.rdf_bin_width) out.rdf_bin_width = 0.05 * r_mean;
  if (!out.rdf_r_max) {
    out.rdf_r_max = 8.0 * r_mean;
    if (s.domain.is_periodic()) out.rdf_r_max = std::min(*out.rdf_r_max, 0.5 * s.domain.edge());
  }
  return out;
}

MetricsConfig shared_settings(const MetricsConfig& config, const PackingSnapshot& a, const PackingSnapshot& b) {
  const MetricsConfig ra = resolved_settings(config, a);
  const MetricsConfig rb = resolved_settings(config, b);
  MetricsConfig out = config;
  out.contact_tolerance = std::min(*ra.contact_tolerance, *rb.contact_tolerance);
  out.rdf_bin_width = std::min(*ra.rdf_bin_width, *rb.rdf_bin_width);
  out.rdf_r_max = std::min(*ra.rdf_r_max, *rb.rdf_r_max);
  return out;
}

PackingMetrics compute_metrics(const PackingSnapshot& s, const MetricsConfig& config) {
  config.validate();
  if (s.particles.empty()) throw Error("EMPTY_SNAPSHOT", "snapshot has no particles");
  PackingMetrics m;
  m.provenance = s.provenance;
  m.n_particles = s.particles.size();
  m.region = config.region ? *config.region : default_region(s);
  m.packing_fraction = packing_fraction(s, m.region, config.samples_per_particle);

  const MetricsConfig settings = resolved_settings(config, s);
  const double tol = *settings.contact_tolerance;
  const auto contacts = geometric_contacts(s, tol);
  m.coordination.tolerance = tol;
  m.coordination.per_particle.assign(s.particles.size(), 0);
  std::vector<Vec3> normals;
  for (const auto& c : contacts) {
    ++m.coordination.per_particle[static_cast<std::size_t>(c.i)];
    ++m.coordination.per_particle[static_cast<std::size_t>(c.j)];
    normals.push_back(c.normal);
  }
  long total = 0;
  for (int k : m.coordination.per_particle) {
    total += k;
    ++m.coordination.histogram[k];
  }
  m.coordination.mean = static_cast<double>(total) / static_cast<double>(s.particles.size());
  if (!normals.empty()) m.fabric = fabric_tensor(normals);
  m.n_fabric_contacts = normals.size();

  m.rdf = rdf(s, *settings.rdf_bin_width, *settings.rdf_r_max);

  if (s.has_forces()) {
    m.chains = force_chains(s, config.force_factor, config.angle_limit_deg);
    m.reactions = wall_reactions(s);
  }
  return m;
}

namespace {

nlohmann::json matrix_json(const Mat3& a) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({a(r, 0), a(r, 1), a(r, 2)});
  return rows;
}

nlohmann::json chains_json(const ForceChainGraph& g) {
  nlohmann::json j;
  j["mean_normal_force"] = g.mean_normal_force;
  j["threshold"] = g.threshold;
  j["n_strong_contacts"] = g.edges.size();
  j["n_chains"] = g.chains.size();
  nlohmann::json lengths = nlohmann::json::array();
  nlohmann::json forces = nlohmann::json::array();
  double mean_len = 0.0;
  for (const auto& c : g.chains) {
    lengths.push_back(c.particles.size());
    forces.push_back(c.mean_force);
    mean_len += static_cast<double>(c.particles.size());
  }
  j["chain_lengths"] = lengths;
  j["chain_mean_forces"] = forces;
  j["mean_chain_length"] = g.chains.empty() ? 0.0 : mean_len / static_cast<double>(g.chains.size());
  return j;
}

double mean_chain_length(const ForceChainGraph& g) {
  if (g.chains.empty()) return 0.0;
  double s = 0.0;
  for (const auto& c : g.chains) s += static_cast<double>(c.particles.size());
  return s / static_cast<double>(g.chains.size());
}

Mat3 deviatoric(const Mat3& a) { return a - a.trace() / 3.0 * Mat3::Identity(); }

}  // namespace

nlohmann::json to_json(const PackingMetrics& m) {
  nlohmann::json j;
  j["provenance"] = to_string(m.provenance);
  j["n_particles"] = m.n_particles;
  j["packing_fraction"] = m.packing_fraction;
  j["region"] = {{"lo", {m.region.lo.x(), m.region.lo.y(), m.region.lo.z()}},
                 {"hi", {m.region.hi.x(), m.region.hi.y(), m.region.hi.z()}}};
  j["coordination"] = {{"mean", m.coordination.mean}, {"tolerance", m.coordination.tolerance}};
  j["rdf"] = {{"bin_width", m.rdf.bin_width}, {"r_max", m.rdf.r_max}, {"bins", m.rdf.r.size()}};
  if (m.rdf.warning) j["rdf"]["warning"] = *m.rdf.warning;
  if (m.n_fabric_contacts > 0) {
    j["fabric"] = {{"tensor", matrix_json(m.fabric)}, {"n_contacts", m.n_fabric_contacts}};
    Eigen::SelfAdjointEigenSolver<Mat3> eig(m.fabric);
    const Vec3 ev = eig.eigenvalues();
    j["fabric"]["eigenvalues"] = {ev[0], ev[1], ev[2]};
    j["fabric"]["deviatoric_norm"] = deviatoric(m.fabric).norm();
  } else {
    j["fabric"] = {{"skipped", "no contacts"}};
  }
  if (m.chains) {
    j["force_chains"] = chains_json(*m.chains);
  } else {
    j["force_chains"] = {{"skipped", "force data absent"}};
  }
  if (m.reactions) j["wall_reactions"] = {{"floor_z", m.reactions->floor_z}, {"total_z", m.reactions->total_z}};
  return j;
}

std::string rdf_csv(const RdfCurve& curve) {
  std::ostringstream out;
  out << std::setprecision(17) << "r,g\n";
  for (std::size_t k = 0; k < curve.r.size(); ++k) out << curve.r[k] << ',' << curve.g[k] << '\n';
  return out.str();
}

std::string cn_histogram_csv(const Coordination& cn) {
  std::ostringstream out;
  out << "cn,count\n";
  for (const auto& [k, count] : cn.histogram) out << k << ',' << count << '\n';
  return out.str();
}

double rdf_l2_distance(const RdfCurve& a, const RdfCurve& b) {
  const auto same = [](double x, double y) { return std::abs(x - y) <= 1e-12 * std::max(std::abs(x), std::abs(y)); };
  if (a.r.size() != b.r.size() || !same(a.bin_width, b.bin_width)) {
    std::ostringstream msg;
    msg << "rdf binning differs: " << a.r.size() << " bins of " << a.bin_width << " vs " << b.r.size() << " bins of "
        << b.bin_width;
    throw Error("INCOMPATIBLE_BINNING", msg.str());
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < a.g.size(); ++k) sum += (a.g[k] - b.g[k]) * (a.g[k] - b.g[k]) * a.bin_width;
  return std::sqrt(sum);
}

double fabric_deviatoric_distance(const Mat3& a, const Mat3& b) { return (deviatoric(a) - deviatoric(b)).norm(); }

Comparison compare(const PackingMetrics& a, const PackingMetrics& b) {
  const double ta = a.coordination.tolerance, tb = b.coordination.tolerance;
  if (std::abs(ta - tb) > 1e-12 * std::max(ta, tb)) {
    std::ostringstream msg;
    msg << "contact tolerance differs: " << ta << " vs " << tb;
    throw Error("INCOMPATIBLE_BINNING", msg.str());
  }
  Comparison c;
  c.rdf_l2 = rdf_l2_distance(a.rdf, b.rdf);
  c.delta_fraction = a.packing_fraction - b.packing_fraction;
  c.delta_cn = a.coordination.mean - b.coordination.mean;
  c.fabric_deviatoric = fabric_deviatoric_distance(a.fabric, b.fabric);
  if (a.chains && b.chains) {
    c.delta_chain_count = static_cast<double>(a.chains->chains.size()) - static_cast<double>(b.chains->chains.size());
    c.delta_chain_mean_length = mean_chain_length(*a.chains) - mean_chain_length(*b.chains);
  }
  return c;
}

nlohmann::json comparison_json(const PackingMetrics& a, const PackingMetrics& b, const Comparison& c) {
  nlohmann::json j;
  j["a"] = to_json(a);
  j["b"] = to_json(b);
  j["deltas"] = {{"packing_fraction", c.delta_fraction},
                 {"mean_cn", c.delta_cn},
                 {"rdf_l2", c.rdf_l2},
                 {"fabric_deviatoric", c.fabric_deviatoric}};
  if (c.delta_chain_count) {
    j["deltas"]["force_chains"] = {{"chain_count", *c.delta_chain_count},
                                   {"mean_chain_length", *c.delta_chain_mean_length}};
  } else {
    j["deltas"]["force_chains"] = {{"skipped", "force data absent in at least one snapshot"}};
  }
  return j;
}

std::string comparison_table(const PackingMetrics& a, const PackingMetrics& b, const Comparison& c) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6);
  const auto label = [](const PackingMetrics& m) { return std::string("A/") + to_string(m.provenance); };
  out << std::left << std::setw(22) << "metric" << std::right << std::setw(14) << label(a) << std::setw(14)
      << std::string("B/") + to_string(b.provenance) << std::setw(14) << "delta" << '\n';
  const auto row = [&](const std::string& name, const std::string& x, const std::string& y, const std::string& d) {
    out << std::left << std::setw(22) << name << std::right << std::setw(14) << x << std::setw(14) << y
        << std::setw(14) << d << '\n';
  };
  const auto num = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(6) << v;
    return s.str();
  };
  row("packing_fraction", num(a.packing_fraction), num(b.packing_fraction), num(c.delta_fraction));
  row("mean_cn", num(a.coordination.mean), num(b.coordination.mean), num(c.delta_cn));
  row("fabric_dev_norm", num(deviatoric(a.fabric).norm()), num(deviatoric(b.fabric).norm()),
      num(c.fabric_deviatoric));
  const auto peak = [](const RdfCurve& r) {
    std::size_t k = 0;
    for (std::size_t i = 1; i < r.g.size(); ++i) {
      if (r.g[i] > r.g[k]) k = i;
    }
    return r.g.empty() ? std::pair{0.0, 0.0} : std::pair{r.r[k], r.g[k]};
  };
  const auto [ra, ga] = peak(a.rdf);
  const auto [rb, gb] = peak(b.rdf);
  row("rdf_peak_r", num(ra), num(rb), num(ra - rb));
  row("rdf_peak_g", num(ga), num(gb), num(ga - gb));
  row("rdf_l2", "-", "-", num(c.rdf_l2));
  const auto chains = [&](const PackingMetrics& m) {
    return m.chains ? std::to_string(m.chains->chains.size()) : std::string("n/a");
  };
  row("force_chains", chains(a), chains(b), c.delta_chain_count ? num(*c.delta_chain_count) : "n/a");
  return out.str();
}

}  // namespace granpack
