#include "granpack/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "granpack/errors.hpp"
#include "granpack/rng.hpp"
#include "granpack/snapshot.hpp"

namespace granpack {

void RunConfig::validate() const {
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  try {
    assembly.validate();
  } catch (const ConfigError& e) {
    const std::string& f = e.field();
    if (f.rfind("assembly.", 0) == 0) throw;
    const bool dist = f == "r0" || f == "sigma" || f == "r_min" || f == "r_max";
    const std::string msg = std::string(e.what()).substr(f.size() + 2);
    throw ConfigError((dist ? "assembly.distribution." : "assembly.") + f, msg);
  }
  if (histogram_bins < 1) throw ConfigError("assembly.histogram_bins", "must be >= 1");
  mc.validate();
  dem.validate();
  container.validate();
  metrics.validate();
}

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  assembly.seed = derive_seed(s, 1);
  mc.seed = derive_seed(s, 2);
  dem.seed = derive_seed(s, 3);
}

namespace {

using nlohmann::json;

// One JSON object being consumed; remembers which keys were read so that
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(field(key), "expected a number");
      out = v->get<double>();
    }
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(field(key), "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned()) {
          out = static_cast<Int>(v->get<std::uint64_t>());
        } else {
          const auto x = v->get<std::int64_t>();
          if (x < 0) throw ConfigError(field(key), "must be >= 0");
          out = static_cast<Int>(x);
        }
      } else {
        out = static_cast<Int>(v->get<std::int64_t>());
      }
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(field(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  // Number or the string "auto" (stored as nullopt).
  void optional_number(const std::string& key, std::optional<double>& out) {
    if (const json* v = find(key)) {
      if (v->is_string() && v->get<std::string>() == "auto") {
        out.reset();
      } else if (v->is_number()) {
        out = v->get<double>();
      } else {
        throw ConfigError(field(key), "expected a number or \"auto\"");
      }
    }
  }

  void vec3(const std::string& key, Vec3& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 3) throw ConfigError(field(key), "expected an array of three numbers");
      for (int k = 0; k < 3; ++k) {
        if (!(*v)[static_cast<std::size_t>(k)].is_number()) {
          throw ConfigError(field(key), "expected an array of three numbers");
        }
        out[k] = (*v)[static_cast<std::size_t>(k)].get<double>();
      }
    }
  }

  std::optional<Section> child(const std::string& key) {
    if (const json* v = find(key)) return Section(*v, field(key));
    return std::nullopt;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json("auto"); }

void parse_assembly(Section& s, RunConfig& c) {
  s.integer("n", c.assembly.n);
  std::string family = to_string(c.assembly.family.kind);
  s.string("family", family);
  try {
    c.assembly.family = ShapeFamily::defaults(family_from_string(family));
  } catch (const ConfigError&) {
    throw ConfigError(s.field("family"), "unknown family '" + family + "'");
  }
  if (const json* r = s.find("ratios")) {
    if (!r->is_array() || r->size() != 6) throw ConfigError(s.field("ratios"), "expected an array of six numbers");
    for (std::size_t k = 0; k < 6; ++k) {
      if (!(*r)[k].is_number()) throw ConfigError(s.field("ratios"), "expected an array of six numbers");
      c.assembly.family.ratios[k] = (*r)[k].get<double>();
    }
  }
  if (auto d = s.child("distribution")) {
    d->number("r0", c.assembly.distribution.r0);
    d->number("sigma", c.assembly.distribution.sigma);
    d->number("r_min", c.assembly.distribution.r_min);
    d->number("r_max", c.assembly.distribution.r_max);
    d->finish();
  }
  s.number("density", c.assembly.density);
  s.integer("histogram_bins", c.histogram_bins);
  s.finish();
}

void parse_mc(Section& s, McConfig& mc) {
  s.number("phi0", mc.phi0);
  s.number("tolerance", mc.tolerance);
  s.integer("max_iterations", mc.max_iterations);
  s.number("rotation_scale", mc.rotation_scale);
  std::string boundary = mc.boundary == Boundary::Periodic ? "periodic" : "hard_walls";
  s.string("boundary", boundary);
  if (boundary == "periodic") {
    mc.boundary = Boundary::Periodic;
  } else if (boundary == "hard_walls") {
    mc.boundary = Boundary::HardWalls;
  } else {
    throw ConfigError(s.field("boundary"), "expected \"periodic\" or \"hard_walls\"");
  }
  s.boolean("average_moves", mc.average_moves);
  s.integer("stall_window", mc.stall_window);
  s.number("stall_improvement", mc.stall_improvement);
  s.number("stall_gain", mc.stall_gain);
  s.number("max_gain", mc.max_gain);
  s.boolean("domain_growth", mc.domain_growth);
  s.integer("growth_window", mc.growth_window);
  s.number("growth_rate", mc.growth_rate);
  s.number("max_growth_step", mc.max_growth_step);
  s.finish();
}

void parse_dem(Section& s, DemConfig& dem, Container& box) {
  if (auto m = s.child("material")) {
    m->number("youngs_modulus", dem.material.youngs_modulus);
    m->number("poisson_ratio", dem.material.poisson_ratio);
    m->number("friction", dem.material.friction);
    m->number("damping", dem.material.damping);
    m->number("rolling_friction", dem.material.rolling_friction);
    m->number("rolling_damping", dem.material.rolling_damping);
    m->finish();
  }
  s.vec3("gravity", dem.gravity);
  std::optional<double> dt;
  if (dem.dt > 0.0) dt = dem.dt;
  s.optional_number("dt", dt);
  if (dt && !(*dt > 0.0)) throw ConfigError(s.field("dt"), "must be > 0 or \"auto\"");
  dem.dt = dt.value_or(0.0);
  s.number("rest_ke_threshold", dem.rest_ke_threshold);
  s.integer("rest_window", dem.rest_window);
  s.integer("max_steps", dem.max_steps);
  s.integer("trace_interval", dem.trace_interval);
  if (auto c = s.child("container")) {
    c->number("width_x", box.width_x);
    c->number("width_y", box.width_y);
    c->finish();
  }
  s.finish();
}

void parse_metrics(Section& s, MetricsConfig& m) {
  s.optional_number("contact_tolerance", m.contact_tolerance);
  s.optional_number("rdf_bin_width", m.rdf_bin_width);
  s.optional_number("rdf_r_max", m.rdf_r_max);
  s.number("force_factor", m.force_factor);
  s.number("angle_limit_deg", m.angle_limit_deg);
  s.integer("samples_per_particle", m.samples_per_particle);
  if (const json* r = s.find("region")) {
    if (r->is_string() && r->get<std::string>() == "auto") {
      m.region.reset();
    } else {
      Section box(*r, s.field("region"));
      Region region;
      box.vec3("lo", region.lo);
      box.vec3("hi", region.hi);
      box.finish();
      m.region = region;
    }
  }
  s.finish();
}

}  // namespace

RunConfig parse_config(const nlohmann::json& j) {
  RunConfig c;
  Section root(j, "");
  std::uint64_t seed = 0;
  root.integer("seed", seed);
  c.set_seed(seed);
  root.string("output_dir", c.output_dir);
  int threads = 1;
  root.integer("threads", threads);
  if (threads < 1) throw ConfigError("threads", "must be >= 1");
  if (auto s = root.child("assembly")) parse_assembly(*s, c);
  if (auto s = root.child("mc")) parse_mc(*s, c.mc);
  if (auto s = root.child("dem")) parse_dem(*s, c.dem, c.container);
  if (auto s = root.child("metrics")) parse_metrics(*s, c.metrics);
  root.finish();
  c.mc.threads = threads;
  c.dem.threads = threads;
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("IO_ERROR", "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("CONFIG_PARSE", path.string() + ": " + e.what());
  }
  return parse_config(j);
}

nlohmann::json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["threads"] = c.mc.threads;
  const auto& a = c.assembly;
  j["assembly"] = {{"n", a.n},
                   {"family", to_string(a.family.kind)},
                   {"ratios", a.family.ratios},
                   {"distribution",
                    {{"r0", a.distribution.r0},
                     {"sigma", a.distribution.sigma},
                     {"r_min", a.distribution.r_min},
                     {"r_max", a.distribution.r_max}}},
                   {"density", a.density},
                   {"histogram_bins", c.histogram_bins}};
  const auto& mc = c.mc;
  j["mc"] = {{"phi0", mc.phi0},
             {"tolerance", mc.tolerance},
             {"max_iterations", mc.max_iterations},
             {"rotation_scale", mc.rotation_scale},
             {"boundary", mc.boundary == Boundary::Periodic ? "periodic" : "hard_walls"},
             {"average_moves", mc.average_moves},
             {"stall_window", mc.stall_window},
             {"stall_improvement", mc.stall_improvement},
             {"stall_gain", mc.stall_gain},
             {"max_gain", mc.max_gain},
             {"domain_growth", mc.domain_growth},
             {"growth_window", mc.growth_window},
             {"growth_rate", mc.growth_rate},
             {"max_growth_step", mc.max_growth_step}};
  const auto& d = c.dem;
  j["dem"] = {{"material",
               {{"youngs_modulus", d.material.youngs_modulus},
                {"poisson_ratio", d.material.poisson_ratio},
                {"friction", d.material.friction},
                {"damping", d.material.damping},
                {"rolling_friction", d.material.rolling_friction},
                {"rolling_damping", d.material.rolling_damping}}},
              {"gravity", vec_json(d.gravity)},
              {"dt", d.dt > 0.0 ? json(d.dt) : json("auto")},
              {"rest_ke_threshold", d.rest_ke_threshold},
              {"rest_window", d.rest_window},
              {"max_steps", d.max_steps},
              {"trace_interval", d.trace_interval},
              {"container", {{"width_x", c.container.width_x}, {"width_y", c.container.width_y}}}};
  const auto& m = c.metrics;
  j["metrics"] = {{"contact_tolerance", optional_json(m.contact_tolerance)},
                  {"rdf_bin_width", optional_json(m.rdf_bin_width)},
                  {"rdf_r_max", optional_json(m.rdf_r_max)},
                  {"force_factor", m.force_factor},
                  {"angle_limit_deg", m.angle_limit_deg},
                  {"samples_per_particle", m.samples_per_particle},
                  {"region", m.region ? json{{"lo", vec_json(m.region->lo)}, {"hi", vec_json(m.region->hi)}}
                                      : json("auto")}};
  return j;
}

std::uint64_t config_hash(const RunConfig& c) {
  json j = to_json(c);
  // Output location and thread count do not change results.
  j.erase("output_dir");
  j.erase("threads");
  return fnv1a(j.dump());
}

}  // namespace granpack
