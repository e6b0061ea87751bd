// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Usage: granpack_acceptance [work_dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "audits.hpp"
#include "granpack/pipeline.hpp"
#include "support.hpp"

using namespace granpack;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Verdict& v) {
  std::printf("%s [%d] %s: %s\n", v.pass ? "PASS" : "FAIL", id, name.c_str(), v.detail.c_str());
  std::fflush(stdout);
  if (!v.pass) ++failures;
}

// Exceptions inside a criterion count as a failure of that criterion only.
void criterion(int id, const std::string& name, const std::function<Verdict()>& body) {
  try {
    report(id, name, body());
  } catch (const std::exception& e) {
    report(id, name, {false, std::string("exception: ") + e.what()});
  }
}

std::string fmt(const char* f, auto... args) {
  char buf[2048];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double truncated_cdf(const SizeDistribution& d, double r) {
  using testing_support::phi;
  const auto z = [&](double x) { return (std::log(x) - std::log(d.r0)) / d.sigma; };
  if (r <= d.r_min) return 0.0;
  if (r >= d.r_max) return 1.0;
  return (phi(z(r)) - phi(z(d.r_min))) / (phi(z(d.r_max)) - phi(z(d.r_min)));
}

Vec3 random_unit(SplitMix64& rng) {
  for (;;) {
    const Vec3 v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (v.norm() > 0.1 && v.norm() <= 1.0) return v.normalized();
  }
}

RunConfig acceptance_config(std::size_t n, FamilyKind family) {
  RunConfig c = parse_config({{"seed", 42}, {"assembly", {{"n", n}, {"family", to_string(family)}}}});
  return c;
}

struct PipelineRun {
  fs::path dir;
  double mc_seconds = 0.0;
  double dem_seconds = 0.0;
  std::string error;
};

PipelineRun run_pipeline(const RunConfig& cfg, const fs::path& dir) {
  PipelineRun r;
  r.dir = dir;
  fs::remove_all(dir);
  try {
    const fs::path assembly = run_assemble(cfg, dir);
    auto t0 = Clock::now();
    const fs::path mc = run_pack_mc(cfg, assembly, dir, true);
    r.mc_seconds = seconds_since(t0);
    t0 = Clock::now();
    const fs::path dem = run_pack_dem(cfg, assembly, dir, true);
    r.dem_seconds = seconds_since(t0);
    run_analyze(cfg, mc, dir);
    run_analyze(cfg, dem, dir);
    run_compare(cfg, mc, dem, dir / "compare");
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "granpack_acceptance";
  fs::create_directories(work);

  criterion(1, "distribution fidelity", [] {
    const auto t0 = Clock::now();
    const SizeDistribution d{1.0, 0.25, 0.2, 2.5};
    const TruncatedLogNormal dist(d);
    SplitMix64 rng(20240601);
    std::vector<double> r(100000);
    bool bounded = true;
    for (auto& x : r) {
      x = sample_radius(dist, rng);
      bounded = bounded && x >= d.r_min && x <= d.r_max;
    }
    const double secs = seconds_since(t0);
    std::sort(r.begin(), r.end());
    const double n = static_cast<double>(r.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double f = truncated_cdf(d, r[i]);
      ks = std::max({ks, std::abs(f - i / n), std::abs((i + 1) / n - f)});
    }
    return Verdict{ks < 0.01 && secs < 5.0 && bounded,
                   fmt("KS D=%.5f (<0.01) over 1e5 draws, all in [0.2, 2.5]=%s, %.3f s (<5 s)", ks,
                       bounded ? "yes" : "no", secs)};
  });

  const RunConfig cfg = acceptance_config(1000, FamilyKind::Sphere);
  std::printf("running the 1000-sphere pipeline (MC and DEM)...\n");
  std::fflush(stdout);
  const PipelineRun first = run_pipeline(cfg, work / "run_a");

  criterion(2, "MC convergence, 1000 spheres", [&] {
    if (!first.error.empty()) return Verdict{false, first.error};
    const auto j = read_json(first.dir / "mc.json");
    const double mean = j.at("mean_rel_overlap"), max = j.at("max_rel_overlap");
    const bool converged = j.at("converged");
    const long iters = j.at("iterations");
    const double phi = j.at("packing_fraction");
    return Verdict{converged && mean <= 1e-4 && max <= 1e-3 && first.mc_seconds < 300.0,
                   fmt("converged=%s after %ld iterations (max %ld), mean=%.3e (<=1e-4), max=%.3e (<=1e-3), "
                       "phi=%.4f, %.1f s (<300 s)",
                       converged ? "yes" : "no", iters, cfg.mc.max_iterations, mean, max, phi, first.mc_seconds)};
  });

  criterion(3, "MC shape generality, 300 particles each", [&] {
    bool all = true;
    std::string detail;
    for (FamilyKind kind : {FamilyKind::Prolate, FamilyKind::Oblate, FamilyKind::Carrot, FamilyKind::HalfDome}) {
      RunConfig c = acceptance_config(300, kind);
      const auto t0 = Clock::now();
      const McResult r = run(build_assembly(c.assembly), c.mc);
      const double secs = seconds_since(t0);
      const auto& last = r.state.history.back();
      const bool ok = r.converged && last.mean_rel_overlap <= c.mc.tolerance &&
                      last.max_rel_overlap <= 10.0 * c.mc.tolerance && secs < 900.0;
      all = all && ok;
      detail += fmt("%s%s: %s in %ld it, mean=%.2e, %.0f s", detail.empty() ? "" : "; ", to_string(kind),
                    ok ? "ok" : "FAILED", r.state.iteration, last.mean_rel_overlap, secs);
      std::printf("  %s done\n", to_string(kind));
      std::fflush(stdout);
    }
    return Verdict{all, detail + " (each <900 s)"};
  });

  criterion(4, "contact kernel degeneracy oracles", [] {
    SplitMix64 rng(4);
    double worst_sphere = 0.0, worst_poly = 0.0;
    int sphere_pairs = 0, poly_pairs = 0, mismatched = 0;
    while (sphere_pairs < 1000) {
      const double ra = rng.uniform(0.2, 2.5), rb = rng.uniform(0.2, 2.5);
      const Vec3 pos = rng.uniform(0.05, 0.999) * (ra + rb) * random_unit(rng);
      const auto exact = detect_contact(testing_support::sphere_at(ra, Vec3::Zero(), 0),
                                        testing_support::sphere_at(rb, pos, 1));
      const auto general = detect_contact(
          testing_support::at(ParticleShape::ellipsoid(ra, ra, ra), Vec3::Zero(), 0, rng.orientation()),
          testing_support::at(ParticleShape::ellipsoid(rb, rb, rb), pos, 1, rng.orientation()));
      if (!exact || !general) {
        ++mismatched;
        ++sphere_pairs;
        continue;
      }
      worst_sphere = std::max(worst_sphere, std::abs(general->depth - exact->depth) / exact->depth);
      ++sphere_pairs;
    }
    while (poly_pairs < 1000) {
      const Vec3 sa(rng.uniform(0.2, 1.5), rng.uniform(0.2, 1.5), rng.uniform(0.2, 1.5));
      const Vec3 sb(rng.uniform(0.2, 1.5), rng.uniform(0.2, 1.5), rng.uniform(0.2, 1.5));
      const Orientation qa = rng.orientation(), qb = rng.orientation();
      const Vec3 pos = rng.uniform(0.1, 2.5) * random_unit(rng);
      const auto ell = detect_contact(
          testing_support::at(ParticleShape::ellipsoid(sa.x(), sa.y(), sa.z()), Vec3::Zero(), 0, qa),
          testing_support::at(ParticleShape::ellipsoid(sb.x(), sb.y(), sb.z()), pos, 1, qb));
      const auto poly = detect_contact(
          testing_support::at(ParticleShape::poly_ellipsoid(sa.x(), sa.x(), sa.y(), sa.y(), sa.z(), sa.z()),
                              Vec3::Zero(), 0, qa),
          testing_support::at(ParticleShape::poly_ellipsoid(sb.x(), sb.x(), sb.y(), sb.y(), sb.z(), sb.z()), pos,
                              1, qb));
      if (ell.has_value() != poly.has_value()) ++mismatched;
      if (!ell || !poly) continue;  // only overlapping poses count towards the 1000
      worst_poly = std::max(worst_poly, std::abs(poly->depth - ell->depth) / ell->depth);
      ++poly_pairs;
    }
    const bool ok = mismatched == 0 && worst_sphere <= 1e-8 && worst_poly <= 1e-8;
    return Verdict{ok, fmt("1000 sphere-degenerate ellipsoid pairs: worst rel depth error %.2e; 1000 "
                           "ellipsoid-degenerate poly-ellipsoid pairs: %.2e (<=1e-8); detection mismatches %d",
                           worst_sphere, worst_poly, mismatched)};
  });

  criterion(5, "DEM physics audits", [&] {
    const auto ff = audits::free_fall(1e-3, 1000);
    const double ff_err = std::abs(ff.drop - ff.expected) / ff.expected;
    const auto bounce = audits::bounce_energy(3);
    std::string sweep;
    for (double z0 : {1.05, 1.2, 1.5, 2.0, 5.0}) {
      sweep += fmt("%s%.2f: %.3f%%", sweep.empty() ? "" : ", ", z0, 100.0 * audits::bounce_energy(3, z0).max_drift);
    }

    // Column of three spheres, no wall contact: floor alone carries the weight.
    DemState column;
    double z = 0.0;
    for (double r : {0.5, 0.4, 0.6}) {
      z += r + 0.2;
      Particle p = Particle::make(static_cast<std::int64_t>(column.particles.size()), ParticleShape::sphere(r), 2650.0);
      p.position = Vec3(10, 10, z);
      z += r;
      column.particles.push_back(p);
      column.velocities.push_back(Vec3::Zero());
      column.angular_velocities.push_back(Vec3::Zero());
    }
    column.domain_height = z;
    const DemResult col = simulate(column, Container{}, DemConfig{});
    double col_weight = 0.0, col_floor = 0.0;
    for (const auto& p : col.state.particles) col_weight += p.mass() * 9.81;
    for (const auto& c : col.snapshot.contacts)
      if (c.contact.id_j == kFloorId) col_floor += c.force.z();
    const double col_ratio = col_floor / col_weight;

    if (!first.error.empty()) return Verdict{false, first.error};
    const auto dem = read_json(first.dir / "dem.json");
    const double weight = dem.at("total_weight");
    const double floor_ratio = dem.at("floor_reaction_z").get<double>() / weight;
    const double total_ratio = dem.at("wall_reaction_z").get<double>() / weight;
    const long violations = dem.at("friction_violations");
    const double max_ratio = dem.at("max_friction_ratio");
    const bool at_rest = dem.at("at_rest");

    const bool ok = ff_err <= 1e-3 && bounce.bounces == 3 && bounce.max_drift <= 0.01 && col.at_rest &&
                    std::abs(col_ratio - 1.0) <= 1e-3 && at_rest && std::abs(total_ratio - 1.0) <= 1e-3 &&
                    violations == 0;
    return Verdict{ok, fmt("free fall rel err %.1e (<=1e-3); bounce energy drift %.3f%% over %d bounces at dt=%.4g "
                           "from centre height 3 (<=1%%) [other start heights %s]; 3-sphere column floor/weight=%.6f; 1000-sphere rest: (floor+walls)/weight=%.6f "
                           "(floor alone %.6f), tolerance 1e-3; friction violations=%ld over the run "
                           "(max |Ft|/mu|Fn|=%.15f)",
                           ff_err, 100.0 * bounce.max_drift, bounce.bounces, bounce.dt, sweep.c_str(), col_ratio, total_ratio,
                           floor_ratio, violations, max_ratio)};
  });

  criterion(6, "DEM deposition sanity, 1000 spheres", [&] {
    if (!first.error.empty()) return Verdict{false, first.error};
    const auto dem = read_json(first.dir / "dem.json");
    const auto metrics = read_json(first.dir / "dem_metrics.json");
    const bool at_rest = dem.at("at_rest");
    const long steps = dem.at("steps");
    const double phi = metrics.at("packing_fraction");
    const bool ok = at_rest && phi > 0.54 && phi < 0.66 && first.dem_seconds < 1800.0;
    return Verdict{ok, fmt("at_rest=%s after %ld steps (%.1f s simulated), packing fraction %.4f in (0.54, 0.66), "
                           "%.1f s (<1800 s)",
                           at_rest ? "yes" : "no", steps, dem.at("simulated_time").get<double>(), phi,
                           first.dem_seconds)};
  });

  criterion(7, "metrics oracles", [&] {
    const auto lattice = testing_support::cubic_lattice(5, 0.5);
    const Region cell{Vec3(1.5, 1.5, 1.5), Vec3(2.5, 2.5, 2.5)};
    const double phi = packing_fraction(lattice, cell);
    PackingSnapshot block;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        for (int k = 0; k < 5; ++k)
          block.particles.push_back(testing_support::sphere_at(0.5, Vec3(i, j, k), 25 * i + 5 * j + k));
    const auto cn = coordination_number(block, default_contact_tolerance(block));
    bool interior_six = true;
    for (int i = 1; i < 4; ++i)
      for (int j = 1; j < 4; ++j)
        for (int k = 1; k < 4; ++k) interior_six = interior_six && cn.per_particle[25 * i + 5 * j + k] == 6;

    SplitMix64 rng(7);
    PackingSnapshot gas;
    const double edge = 12.0;
    const int n = 3000;
    gas.domain = DomainSpec::periodic(edge);
    for (int k = 0; k < n; ++k) {
      gas.particles.push_back(
          testing_support::sphere_at(0.01, Vec3(rng.uniform(0, edge), rng.uniform(0, edge), rng.uniform(0, edge)), k));
    }
    const double dr = 0.25;
    const RdfCurve g = rdf(gas, dr, 6.0);
    const double rho = n / (edge * edge * edge);
    double worst_sigma = 0.0;
    for (std::size_t k = 1; k < g.g.size(); ++k) {
      const double r0 = k * dr, r1 = r0 + dr;
      const double pairs = 0.5 * n * rho * 4.0 / 3.0 * std::numbers::pi * (r1 * r1 * r1 - r0 * r0 * r0);
      worst_sigma = std::max(worst_sigma, std::abs(g.g[k] - 1.0) * std::sqrt(pairs));
    }

    double worst_trace = std::abs(fabric_tensor(lattice, default_contact_tolerance(lattice)).trace() - 1.0);
    worst_trace = std::max(worst_trace, std::abs(fabric_tensor(block, default_contact_tolerance(block)).trace() - 1.0));
    int snapshots = 2;
    if (first.error.empty()) {
      for (const char* name : {"mc.gpk", "dem.gpk"}) {
        const PackingSnapshot s = read_snapshot(first.dir / name);
        worst_trace = std::max(worst_trace, std::abs(fabric_tensor(s, default_contact_tolerance(s)).trace() - 1.0));
        ++snapshots;
      }
    }
    const bool ok = std::abs(phi - std::numbers::pi / 6.0) <= 0.002 && interior_six && worst_sigma <= 3.0 &&
                    worst_trace <= 1e-12 && snapshots == 4;
    return Verdict{ok, fmt("lattice fraction %.5f vs pi/6=%.5f (+-0.002); interior CN=6 for all 27 interior "
                           "particles: %s; ideal-gas RDF worst deviation %.2f sigma (<=3) over %zu bins; fabric "
                           "|trace-1| <= %.1e on %d snapshots (<=1e-12)",
                           phi, std::numbers::pi / 6.0, interior_six ? "yes" : "no", worst_sigma, g.g.size() - 1,
                           worst_trace, snapshots)};
  });

  criterion(8, "end-to-end MC vs DEM comparison", [&] {
    if (!first.error.empty()) return Verdict{false, first.error};
    const auto cmp = read_json(first.dir / "compare" / "comparison.json");
    bool populated = true;
    for (const char* side : {"a", "b"}) {
      const auto& m = cmp.at(side);
      populated = populated && m.at("packing_fraction").get<double>() > 0.0 &&
                  m.at("coordination").at("mean").get<double>() > 0.0 && m.at("rdf").at("bins").get<long>() > 0 &&
                  m.at("fabric").at("n_contacts").get<long>() > 0;
    }
    const bool chains_dem_only = cmp.at("a").at("force_chains").contains("skipped") &&
                                 cmp.at("b").at("force_chains").contains("n_chains");
    std::printf("  repeating the pipeline for the byte-identity check...\n");
    std::fflush(stdout);
    const PipelineRun second = run_pipeline(cfg, work / "run_b");
    if (!second.error.empty()) return Verdict{false, "repeat run: " + second.error};
    const auto a = tree_contents(first.dir), b = tree_contents(second.dir);
    std::size_t differing = 0;
    for (const auto& [name, bytes] : a) {
      const auto it = b.find(name);
      if (it == b.end() || it->second != bytes) ++differing;
    }
    if (a.size() != b.size()) ++differing;
    const bool ok = populated && chains_dem_only && differing == 0;
    return Verdict{ok, fmt("geometric metrics populated in both columns: %s; force chains DEM-only: %s; %zu output "
                           "files byte-identical on repeat: %s",
                           populated ? "yes" : "no", chains_dem_only ? "yes" : "no", a.size(),
                           differing == 0 ? "yes" : "no")};
  });

  std::printf("%s: %d of 8 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
