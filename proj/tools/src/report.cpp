#include "sparse_score_cli/report.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#ifndef SPARSE_SCORE_REVISION
#define SPARSE_SCORE_REVISION "unknown"
#endif
#ifndef SPARSE_SCORE_VERSION
#define SPARSE_SCORE_VERSION "0.0.0"
#endif

namespace sparse_score::cli {

namespace {

nlohmann::json param_value(const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (!text.empty() && ec == std::errc() && ptr == end) return v;
  return text;
}

nlohmann::json metric_json(const MetricRecord& rec) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : rec.params) params[k] = param_value(v);
  return {{"metric", rec.metric},
          {"params", params},
          {"value", rec.value},
          {"stderr", rec.std_error},
          {"seed", rec.seed}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

std::string revision_string() {
  return std::string("sparse_score ") + SPARSE_SCORE_VERSION + "+" + SPARSE_SCORE_REVISION;
}

std::filesystem::path output_root(const RunConfig& cfg) {
  const char* env = std::getenv("SPARSE_SCORE_OUT");
  if (env != nullptr && *env != '\0') return std::filesystem::path(env);
  return std::filesystem::path(cfg.str("output.dir"));
}

void RunReport::add_artifact(const std::string& name, const std::filesystem::path& p) {
  artifacts[name] = p.is_absolute() ? p : directory / p;
}

RunReport begin_run(const std::string& command, const RunConfig& cfg) {
  RunReport r;
  r.command = command;
  r.config_hash = cfg.hash();
  r.revision = revision_string();
  r.run_id = cfg.str("output.run_id");
  if (r.run_id.empty()) r.run_id = command + "-" + r.config_hash.substr(0, 10);
  r.directory = output_root(cfg) / r.run_id;
  std::filesystem::create_directories(r.directory);
  write_text(r.directory / "config.txt", cfg.canonical());
  r.add_artifact("config", "config.txt");
  return r;
}

std::string metric_to_json(const MetricRecord& rec) { return metric_json(rec).dump(); }

std::string report_to_json(const RunReport& report, const RunConfig& cfg) {
  nlohmann::json metrics = nlohmann::json::array();
  for (const MetricRecord& m : report.metrics) metrics.push_back(metric_json(m));
  nlohmann::json artifacts = nlohmann::json::object();
  for (const auto& [name, p] : report.artifacts) artifacts[name] = p.string();
  nlohmann::json config = nlohmann::json::object();
  for (const auto& [k, v] : cfg.values()) config[k] = v;
  nlohmann::json doc = {
      {"run_id", report.run_id},
      {"command", report.command},
      {"config_hash", report.config_hash},
      {"revision", report.revision},
      {"config", config},
      {"metrics", metrics},
      {"artifacts", artifacts},
  };
  return doc.dump(2) + "\n";
}

void finish_run(RunReport& report, const RunConfig& cfg) {
  for (const auto& [name, p] : report.artifacts) {
    if (!std::filesystem::exists(p)) {
      throw std::runtime_error("report: artifact '" + name + "' is missing at " + p.string());
    }
  }
  write_text(report.directory / "report.json", report_to_json(report, cfg));
}

}  // namespace sparse_score::cli
