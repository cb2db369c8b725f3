#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparse_score::cli {

/// Bad configuration: unknown key, unparsable value, or an inconsistent
/// combination. Raised before any work starts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KeySpec {
  std::string key;  // "section.name"
  std::string default_value;
  std::string help;
};

/// Every recognised key with its default, in display order.
const std::vector<KeySpec>& key_table();

/// Resolved `section.key = value` configuration. Layers are applied in order:
/// defaults, command preset, config file, flag overrides.
class RunConfig {
 public:
  RunConfig();

  /// Throws ConfigError for an unknown key.
  void set(const std::string& key, const std::string& value);
  /// Applies "key=value" or "key = value".
  void set_assignment(const std::string& assignment);
  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& origin = "<text>");

  const std::string& raw(const std::string& key) const;
  std::string str(const std::string& key) const { return raw(key); }
  double real(const std::string& key) const;
  long long integer(const std::string& key) const;
  std::uint64_t seed(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  std::vector<long long> integers(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  /// One `key = value` line per key, sorted.
  std::string canonical() const;
  /// FNV-1a 64 of canonical() without the output.* keys, as 16 hex digits.
  std::string hash() const;

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a64(const std::string& text);

/// Comma-separated numbers; `key` only labels the error message.
std::vector<double> parse_reals(const std::string& key, const std::string& text);

/// Overrides applied by the `toy` and `sweep` commands before the user's file.
std::map<std::string, std::string> toy_preset();
std::map<std::string, std::string> sweep_preset();

/// Text block listing every key and its default, for --help.
std::string describe_keys();

}  // namespace sparse_score::cli
