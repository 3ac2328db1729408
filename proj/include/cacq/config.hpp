#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cacq {

/// Parse or validation failure tied to a line of the config file (0 = whole file).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Right-hand side of `key = value`: a number, "string", true/false, a bare
/// word, [array, ...] or name(arg, ...).
struct ConfigValue {
  enum class Kind { number, string, boolean, word, array, call };
  Kind kind = Kind::number;
  double number = 0.0;
  bool flag = false;
  std::string text;  // string contents, word, or call name
  std::vector<ConfigValue> items;
  int line = 0;

  std::string describe() const;
  /// Numbers as double; throws ConfigError naming `what`.
  double as_number(const std::string& what) const;
  int as_int(const std::string& what) const;
  std::vector<double> as_vector(const std::string& what) const;
  std::vector<std::vector<double>> as_matrix(const std::string& what) const;
};

struct ConfigEntry {
  ConfigValue value;
  int line = 0;
};

class ConfigSection {
 public:
  std::string name;
  int line = 0;

  const ConfigEntry* find(const std::string& key) const;
  bool has(const std::string& key) const { return find(key) != nullptr; }
  const ConfigEntry& require(const std::string& key) const;

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) const;
  int integer(const std::string& key, std::optional<int> fallback = std::nullopt) const;
  bool boolean(const std::string& key, std::optional<bool> fallback = std::nullopt) const;
  std::string word(const std::string& key, std::optional<std::string> fallback = std::nullopt) const;

  /// Throws on the first key that no accessor asked for.
  void reject_unused() const;

  std::map<std::string, ConfigEntry> entries;
  std::vector<std::string> order;

 private:
  mutable std::map<std::string, bool> used_;
};

class ConfigDocument {
 public:
  const ConfigSection* section(const std::string& name) const;
  const ConfigSection& require_section(const std::string& name) const;
  /// Throws for sections outside `known`.
  void reject_unknown_sections(const std::vector<std::string>& known) const;

  std::map<std::string, ConfigSection> sections;
};

ConfigDocument parse_config(std::string_view text);
ConfigDocument load_config_file(const std::string& path);

}  // namespace cacq
