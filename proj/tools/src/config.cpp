#include "sparse_score_cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sparse_score::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config: " + key + " expects a number, got '" + text + "'");
  }
  return v;
}

long long parse_int(const std::string& key, const std::string& text) {
  long long v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config: " + key + " expects an integer, got '" + text + "'");
  }
  return v;
}

}  // namespace

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      {"target.kind", "gaussian", "gaussian | gaussian_mixture | gaussian_uniform_product"},
      {"target.dim", "3", "data dimension d"},
      {"target.mean", "0", "Gaussian means, one value or d values"},
      {"target.var", "0.08,1,1", "Gaussian variances, one value or d values"},
      {"target.gaussian_coords", "0", "Gaussian coordinates of gaussian_uniform_product"},
      {"target.lower", "0", "uniform lower bounds, one value or d values"},
      {"target.upper", "1", "uniform upper bounds, one value or d values"},
      {"target.mixture_weights", "0.5,0.5", "mixture weights"},
      {"target.mixture_means", "-2;2", "component means separated by ';', each one value or d values"},
      {"target.mixture_vars", "1;1", "component variances separated by ';'"},
      {"target.n", "2000", "training samples drawn from the target"},
      {"target.data_seed", "0", "seed for drawing the training samples"},
      {"target.data", "", "optional dataset path; replaces the drawn samples"},
      {"target.data_format", "csv", "csv | idx"},
      {"schedule.sigma_max", "25", "VE noise scale sigma (> 1)"},
      {"schedule.eps", "1e-05", "smallest time"},
      {"net.hidden", "64,64,64", "hidden layer widths"},
      {"net.time_feat_dim", "16", "Fourier time-feature width (even)"},
      {"net.fourier_scale", "30", "std of the Fourier frequencies"},
      {"constraint.l1_radius", "1", "radius of the l1 ball for the parameters"},
      {"constraint.output_l1_cap", "1", "l1 cap on the network output"},
      {"constraint.output_cap", "true", "apply the output cap"},
      {"objective.r", "0", "regularization weight on kappa^2"},
      {"objective.weighting", "none", "none | sigma2"},
      {"train.epochs", "100", "training epochs"},
      {"train.batch_size", "128", "minibatch size"},
      {"train.learning_rate", "0.001", "Adam learning rate"},
      {"train.seed", "0", "training seed"},
      {"train.projection", "false", "project the parameters onto the l1 ball after every step"},
      {"train.kappa_init", "1", "initial kappa"},
      {"train.kappa_trainable", "true", "train kappa jointly with the parameters"},
      {"train.checkpoint_every", "0", "write a checkpoint every k epochs (0 = final only)"},
      {"sampler.steps", "60", "sampling steps T"},
      {"sampler.chains", "1000", "number of chains"},
      {"sampler.seed", "0", "sampling seed"},
      {"sampler.record", "false", "write the trajectory tensor"},
      {"sampler.snr", "0", "signal-to-noise step rule (0 = fixed step)"},
      {"metrics.seed", "0", "seed for Monte-Carlo metrics"},
      {"metrics.n_t", "100", "times drawn by score_error"},
      {"metrics.n_x", "50", "points per time drawn by score_error"},
      {"metrics.n_mc", "2000", "Monte-Carlo draws for profiles and audits"},
      {"metrics.knn_k", "5", "neighbour rank of the kNN KL estimator"},
      {"metrics.sparsity_levels", "", "levels for the sparsity profile (empty = 1..d)"},
      {"metrics.s", "0", "sparsity level for the bound audit (0 = d)"},
      {"metrics.B", "-1", "derivative bound for the audit (negative = estimate)"},
      {"metrics.tilting_T", "50", "discrete schedule length for the tilting check"},
      {"output.dir", "runs", "output root (SPARSE_SCORE_OUT overrides)"},
      {"output.run_id", "", "run directory name (empty = derived from command and hash)"},
      {"sweep.r", "0,0.001", "regularization weights; r = 0 is the baseline"},
      {"sweep.T", "200", "sampling step counts"},
      {"sweep.s", "1,2,4,8", "numbers of Gaussian coordinates"},
      {"sweep.seeds", "0,1,2", "seeds"},
      {"sweep.gaussian_mean", "0.5", "mean of the Gaussian coordinates"},
      {"sweep.gaussian_var", "0.08", "variance of the Gaussian coordinates"},
      {"sweep.workers", "1", "parallel cells"},
  };
  return table;
}

std::map<std::string, std::string> toy_preset() {
  return {
      {"target.kind", "gaussian"},
      {"target.dim", "3"},
      {"target.mean", "0"},
      {"target.var", "0.08,1,1"},
      {"target.n", "2000"},
      {"schedule.sigma_max", "1.02"},
      {"net.fourier_scale", "1"},
      {"constraint.l1_radius", "300"},
      {"constraint.output_l1_cap", "0.3"},
      {"objective.r", "0.001"},
      {"train.epochs", "500"},
      {"train.projection", "true"},
      {"train.kappa_init", "30"},
      {"sampler.steps", "60"},
      {"sampler.chains", "2000"},
      {"sampler.seed", "7"},
      {"sampler.record", "true"},
  };
}

std::map<std::string, std::string> sweep_preset() {
  return {
      {"target.kind", "gaussian_uniform_product"},
      {"target.dim", "8"},
      {"target.n", "2000"},
      {"schedule.sigma_max", "1.02"},
      {"net.fourier_scale", "1"},
      {"constraint.l1_radius", "300"},
      {"constraint.output_l1_cap", "1"},
      {"train.epochs", "300"},
      {"train.projection", "true"},
      {"train.kappa_init", "30"},
      {"sampler.chains", "2000"},
  };
}

std::string describe_keys() {
  std::ostringstream out;
  out << "Configuration keys (section.key = value; default in brackets):\n";
  for (const KeySpec& k : key_table()) {
    out << "  " << k.key << " [" << k.default_value << "]  " << k.help << "\n";
  }
  return out.str();
}

RunConfig::RunConfig() {
  for (const KeySpec& k : key_table()) values_[k.key] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: unknown key '" + key + "'");
  it->second = trim(value);
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("config: expected key=value, got '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      set_assignment(line);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  load_text(buf.str(), path.string());
}

const std::string& RunConfig::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: unknown key '" + key + "'");
  return it->second;
}

double RunConfig::real(const std::string& key) const { return parse_real(key, raw(key)); }

long long RunConfig::integer(const std::string& key) const { return parse_int(key, raw(key)); }

std::uint64_t RunConfig::seed(const std::string& key) const {
  const long long v = integer(key);
  if (v < 0) throw ConfigError("config: " + key + " must be >= 0");
  return static_cast<std::uint64_t>(v);
}

bool RunConfig::boolean(const std::string& key) const {
  std::string v = raw(key);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: " + key + " expects true or false, got '" + raw(key) + "'");
}

std::vector<double> parse_reals(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const std::string& item : split_list(text)) out.push_back(parse_real(key, item));
  return out;
}

std::vector<double> RunConfig::reals(const std::string& key) const { return parse_reals(key, raw(key)); }

std::vector<long long> RunConfig::integers(const std::string& key) const {
  std::vector<long long> out;
  for (const std::string& item : split_list(raw(key))) out.push_back(parse_int(key, item));
  return out;
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string RunConfig::hash() const {
  // Output placement does not change what a run computes.
  std::string text;
  for (const auto& [k, v] : values_) {
    if (k.rfind("output.", 0) != 0) text += k + " = " + v + "\n";
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

}  // namespace sparse_score::cli
