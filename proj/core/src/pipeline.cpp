#include "granpack/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "granpack/errors.hpp"

namespace granpack {

OutputLock::OutputLock(const fs::path& dir) : path_(dir / ".granpack.lock") {
  fs::create_directories(dir);
  // "x" makes fopen fail when the file exists.
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (!f) {
    path_.clear();
    throw Error("OUTPUT_LOCKED", "another granpack process holds " + (dir / ".granpack.lock").string());
  }
  std::fclose(f);
}

OutputLock::~OutputLock() {
  if (!path_.empty()) {
    std::error_code ec;
    fs::remove(path_, ec);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("IO_ERROR", "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("IO_ERROR", "write failed for " + path.string());
}

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

void write_effective_config(const RunConfig& config, const fs::path& out_dir) {
  write_json(out_dir / "effective_config.json", to_json(config));
}

PackingSnapshot read_assembly(const fs::path& path) {
  PackingSnapshot s = read_snapshot(path);
  if (s.provenance != Provenance::Assembly) {
    throw Error("WRONG_INPUT", path.string() + " is a " + to_string(s.provenance) + " snapshot, expected an assembly");
  }
  if (s.particles.empty()) throw Error("WRONG_INPUT", path.string() + " holds no particles");
  return s;
}

double total_volume(const PackingSnapshot& s) {
  double v = 0.0;
  for (const auto& p : s.particles) v += p.shape.volume();
  return v;
}

}  // namespace

fs::path run_assemble(const RunConfig& config, const fs::path& out_dir) {
  config.validate();
  OutputLock lock(out_dir);
  PackingSnapshot s;
  s.provenance = Provenance::Assembly;
  s.particles = build_assembly(config.assembly);
  s.converged = true;
  s.config_hash = config_hash(config);

  const fs::path file = out_dir / "assembly.gpk";
  write_snapshot(file, s);
  nlohmann::json summary = snapshot_summary(s);
  summary["family"] = to_string(config.assembly.family.kind);
  write_json(out_dir / "assembly.json", summary);

  std::ostringstream csv;
  csv << std::setprecision(17) << "bin_center,empirical,analytic\n";
  for (const auto& row : histogram_report(s.particles, config.assembly.distribution, config.histogram_bins)) {
    csv << row.bin_center << ',' << row.empirical << ',' << row.analytic << '\n';
  }
  write_text(out_dir / "size_histogram.csv", csv.str());
  write_effective_config(config, out_dir);
  return file;
}

fs::path run_pack_mc(const RunConfig& config, const fs::path& assembly, const fs::path& out_dir,
                     bool allow_unconverged) {
  config.validate();
  const PackingSnapshot input = read_assembly(assembly);
  OutputLock lock(out_dir);
  const double initial_edge = initial_domain(input.particles, config.mc.phi0);
  McResult r = run(input.particles, config.mc);
  r.snapshot.config_hash = config_hash(config);

  const fs::path file = out_dir / "mc.gpk";
  write_snapshot(file, r.snapshot);
  nlohmann::json summary = snapshot_summary(r.snapshot);
  const auto& last = r.state.history.back();
  summary["mean_rel_overlap"] = last.mean_rel_overlap;
  summary["max_rel_overlap"] = last.max_rel_overlap;
  summary["initial_domain_edge"] = initial_edge;
  summary["final_domain_edge"] = r.state.domain_edge;
  summary["packing_fraction"] = total_volume(r.snapshot) / std::pow(r.state.domain_edge, 3);
  write_json(out_dir / "mc.json", summary);

  std::ostringstream csv;
  csv << std::setprecision(17) << "iteration,mean_rel_overlap,max_rel_overlap,n_contacts,domain_edge\n";
  for (const auto& h : r.state.history) {
    csv << h.iteration << ',' << h.mean_rel_overlap << ',' << h.max_rel_overlap << ',' << h.n_contacts << ','
        << h.domain_edge << '\n';
  }
  write_text(out_dir / "mc_history.csv", csv.str());
  write_effective_config(config, out_dir);

  if (!r.converged && !allow_unconverged) {
    std::ostringstream msg;
    msg << "mean relative overlap " << last.mean_rel_overlap << " after " << r.state.iteration
        << " iterations (tolerance " << config.mc.tolerance << ")";
    throw Error("NOT_CONVERGED", msg.str());
  }
  return file;
}

fs::path run_pack_dem(const RunConfig& config, const fs::path& assembly, const fs::path& out_dir,
                      bool allow_unconverged) {
  config.validate();
  const PackingSnapshot input = read_assembly(assembly);
  OutputLock lock(out_dir);
  DemResult r = run_deposition(input.particles, config.dem, config.container);
  r.snapshot.config_hash = config_hash(config);

  const fs::path file = out_dir / "dem.gpk";
  write_snapshot(file, r.snapshot);
  nlohmann::json summary = snapshot_summary(r.snapshot);
  summary["dt"] = r.dt;
  summary["steps"] = r.state.step;
  summary["simulated_time"] = r.state.time;
  summary["at_rest"] = r.at_rest;
  summary["friction_violations"] = r.friction_violations;
  summary["max_friction_ratio"] = r.max_friction_ratio;
  const WallReactions w = wall_reactions(r.snapshot);
  summary["floor_reaction_z"] = w.floor_z;
  summary["wall_reaction_z"] = w.total_z;
  summary["total_weight"] = total_mass(r.state) * config.dem.gravity.norm();
  write_json(out_dir / "dem.json", summary);

  std::ostringstream csv;
  write_trace_csv(csv, r.state.trace);
  write_text(out_dir / "dem_trace.csv", csv.str());
  write_effective_config(config, out_dir);

  if (!r.at_rest && !allow_unconverged) {
    throw Error("NOT_AT_REST", "max_steps " + std::to_string(config.dem.max_steps) + " reached before rest");
  }
  return file;
}

fs::path run_analyze(const RunConfig& config, const fs::path& snapshot, const fs::path& out_dir) {
  config.validate();
  const PackingSnapshot s = read_snapshot(snapshot);
  OutputLock lock(out_dir);
  const PackingMetrics m = compute_metrics(s, config.metrics);
  nlohmann::json j = to_json(m);
  if (m.reactions) {
    double mass = 0.0;
    for (const auto& p : s.particles) mass += p.mass();
    const double weight = mass * config.dem.gravity.norm();
    j["statics"] = {{"total_weight", weight},
                    {"floor_reaction_z", m.reactions->floor_z},
                    {"wall_reaction_z", m.reactions->total_z},
                    {"floor_ratio", m.reactions->floor_z / weight},
                    {"wall_ratio", m.reactions->total_z / weight}};
  }
  const std::string stem = snapshot.stem().string();
  const fs::path file = out_dir / (stem + "_metrics.json");
  write_json(file, j);
  write_text(out_dir / (stem + "_rdf.csv"), rdf_csv(m.rdf));
  write_text(out_dir / (stem + "_cn.csv"), cn_histogram_csv(m.coordination));
  write_effective_config(config, out_dir);
  return file;
}

fs::path run_compare(const RunConfig& config, const fs::path& a, const fs::path& b, const fs::path& out_dir) {
  config.validate();
  const PackingSnapshot sa = read_snapshot(a);
  const PackingSnapshot sb = read_snapshot(b);
  OutputLock lock(out_dir);
  const MetricsConfig settings = shared_settings(config.metrics, sa, sb);
  const PackingMetrics ma = compute_metrics(sa, settings);
  const PackingMetrics mb = compute_metrics(sb, settings);
  const Comparison c = compare(ma, mb);
  nlohmann::json j = comparison_json(ma, mb, c);
  j["a"]["file"] = a.filename().string();
  j["b"]["file"] = b.filename().string();
  const fs::path file = out_dir / "comparison.json";
  write_json(file, j);
  write_text(out_dir / "comparison.txt", comparison_table(ma, mb, c));
  write_effective_config(config, out_dir);
  return file;
}

void run_export(const fs::path& snapshot, const fs::path& out_file) {
  const PackingSnapshot s = read_snapshot(snapshot);
  if (out_file.has_parent_path()) fs::create_directories(out_file.parent_path());
  write_text(out_file, export_csv(s));
}

}  // namespace granpack
