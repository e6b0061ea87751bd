#pragma once

#include <filesystem>
#include <string>

#include "granpack/config.hpp"

namespace granpack {

namespace fs = std::filesystem;

// Exclusive claim on an output directory via `<dir>/.granpack.lock`.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

// Each command writes into `out_dir` (created if needed) together with the
// effective configuration, and returns the path of its main artifact.

// assembly.gpk, assembly.json, size_histogram.csv
fs::path run_assemble(const RunConfig& config, const fs::path& out_dir);

// mc.gpk, mc.json, mc_history.csv. Throws NOT_CONVERGED after writing the
// outputs unless allow_unconverged is set.
fs::path run_pack_mc(const RunConfig& config, const fs::path& assembly, const fs::path& out_dir,
                     bool allow_unconverged);

// dem.gpk, dem.json, dem_trace.csv. Throws NOT_AT_REST after writing the
// outputs unless allow_unconverged is set.
fs::path run_pack_dem(const RunConfig& config, const fs::path& assembly, const fs::path& out_dir,
                      bool allow_unconverged);

// <stem>_metrics.json, <stem>_rdf.csv, <stem>_cn.csv
fs::path run_analyze(const RunConfig& config, const fs::path& snapshot, const fs::path& out_dir);

// comparison.json, comparison.txt
fs::path run_compare(const RunConfig& config, const fs::path& a, const fs::path& b, const fs::path& out_dir);

// Per-particle pose table.
void run_export(const fs::path& snapshot, const fs::path& out_file);

void write_text(const fs::path& path, const std::string& text);

}  // namespace granpack
