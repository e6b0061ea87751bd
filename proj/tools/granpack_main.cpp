#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "granpack/errors.hpp"
#include "granpack/parallel.hpp"
#include "granpack/pipeline.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool allow_unconverged = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_unconverged) {
  cmd->add_option("--config", c.config, "JSON run configuration (defaults when omitted)");
  cmd->add_option("--out", c.out, "Output directory (overrides output_dir)");
  cmd->add_option("--seed", c.seed, "Global seed override");
  cmd->add_option("--threads", c.threads, "Worker threads (default: GRANPACK_THREADS or 1)")->check(CLI::PositiveNumber);
  if (with_unconverged) {
    cmd->add_flag("--allow-unconverged", c.allow_unconverged, "Exit 0 even when the packer stops early");
  }
}

granpack::RunConfig resolve(const Common& c) {
  granpack::RunConfig cfg = c.config.empty() ? granpack::parse_config(nlohmann::json::object())
                                             : granpack::load_config(c.config);
  if (c.seed) cfg.set_seed(*c.seed);
  const int threads = c.threads ? *c.threads : granpack::default_thread_count();
  cfg.mc.threads = threads;
  cfg.dem.threads = threads;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"granpack: granular packing generation and analysis"};
  app.require_subcommand(1);

  Common common;
  std::string input, other, format = "csv";

  auto* assemble = app.add_subcommand("assemble", "Sample a particle assembly");
  add_common(assemble, common, false);

  auto* pack_mc = app.add_subcommand("pack-mc", "Relax an assembly with the Monte Carlo packer");
  pack_mc->add_option("assembly", input, "Assembly file")->required();
  add_common(pack_mc, common, true);

  auto* pack_dem = app.add_subcommand("pack-dem", "Deposit an assembly under gravity with DEM");
  pack_dem->add_option("assembly", input, "Assembly file")->required();
  add_common(pack_dem, common, true);

  auto* analyze = app.add_subcommand("analyze", "Compute packing metrics of a snapshot");
  analyze->add_option("snapshot", input, "Snapshot file")->required();
  add_common(analyze, common, false);

  auto* compare = app.add_subcommand("compare", "Compare the metrics of two snapshots");
  compare->add_option("a", input, "First snapshot")->required();
  compare->add_option("b", other, "Second snapshot")->required();
  add_common(compare, common, false);

  auto* export_cmd = app.add_subcommand("export", "Write a per-particle pose table");
  export_cmd->add_option("snapshot", input, "Snapshot file")->required();
  export_cmd->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv"}));
  export_cmd->add_option("--out", common.out, "Output file (default: <snapshot>.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: USAGE: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    namespace fs = std::filesystem;
    if (export_cmd->parsed()) {
      const fs::path out = common.out.empty() ? fs::path(input).replace_extension(".csv") : fs::path(common.out);
      granpack::run_export(input, out);
      std::cout << out.string() << '\n';
      return 0;
    }
    const granpack::RunConfig cfg = resolve(common);
    const fs::path out_dir = cfg.output_dir;
    fs::path result;
    if (assemble->parsed()) {
      result = granpack::run_assemble(cfg, out_dir);
    } else if (pack_mc->parsed()) {
      result = granpack::run_pack_mc(cfg, input, out_dir, common.allow_unconverged);
    } else if (pack_dem->parsed()) {
      result = granpack::run_pack_dem(cfg, input, out_dir, common.allow_unconverged);
    } else if (analyze->parsed()) {
      result = granpack::run_analyze(cfg, input, out_dir);
    } else if (compare->parsed()) {
      result = granpack::run_compare(cfg, input, other, out_dir);
    }
    std::cout << result.string() << '\n';
    return 0;
  } catch (const granpack::Error& e) {
    std::cerr << "error: " << e.code() << ": " << one_line(e.what()) << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: INTERNAL: " << one_line(e.what()) << '\n';
  }
  return 1;
}
