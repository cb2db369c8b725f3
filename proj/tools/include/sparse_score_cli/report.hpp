#pragma once

#include "sparse_score_cli/config.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace sparse_score::cli {

/// {metric, params, value, stderr, seed}. `params` values are stored as text
/// and written as JSON numbers when they parse as numbers.
struct MetricRecord {
  std::string metric;
  std::map<std::string, std::string> params;
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t seed = 0;
};

/// "sparse_score <version>+<short revision>" baked in at configure time.
std::string revision_string();

/// Output root: $SPARSE_SCORE_OUT when set and non-empty, else output.dir.
std::filesystem::path output_root(const RunConfig& cfg);

struct RunReport {
  std::string run_id;
  std::string command;
  std::string config_hash;
  std::string revision;
  std::filesystem::path directory;
  std::vector<MetricRecord> metrics;
  std::map<std::string, std::filesystem::path> artifacts;  // name -> path

  /// Registers an artifact; relative paths are taken relative to `directory`.
  void add_artifact(const std::string& name, const std::filesystem::path& path);
  std::filesystem::path path(const std::string& file) const { return directory / file; }
};

/// Creates <root>/<run_id> and writes the resolved config next to it.
/// run_id defaults to "<command>-<hash prefix>".
RunReport begin_run(const std::string& command, const RunConfig& cfg);

/// Writes report.json into the run directory. Throws std::runtime_error if a
/// listed artifact does not exist.
void finish_run(RunReport& report, const RunConfig& cfg);

std::string metric_to_json(const MetricRecord& rec);
std::string report_to_json(const RunReport& report, const RunConfig& cfg);

}  // namespace sparse_score::cli
