#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "granpack/dem.hpp"
#include "granpack/mc_packer.hpp"
#include "granpack/metrics.hpp"
#include "granpack/size_distribution.hpp"

namespace granpack {

/// Everything a pipeline run needs. Module seeds are derived from `seed`.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  AssemblySpec assembly;
  int histogram_bins = 40;
  McConfig mc;
  DemConfig dem;
  Container container;
  MetricsConfig metrics;

  void validate() const;
  // Sets the global seed and the derived assembly, MC and DEM seeds.
  void set_seed(std::uint64_t s);
};

// Strict parse: unknown keys and wrong types raise ConfigError naming the
// dotted field path. Missing keys take their defaults.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

// Effective configuration with every default spelled out.
nlohmann::json to_json(const RunConfig& c);
std::uint64_t config_hash(const RunConfig& c);

}  // namespace granpack
