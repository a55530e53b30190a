#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fleetsurv {

/// Flat `key = value` text with optional `[section]` headers. Keys inside a
/// section are stored as "section.key". Lines starting with '#' or ';' are
/// comments.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  [[nodiscard]] bool contains(const std::string& key) const;
  [[nodiscard]] std::optional<std::string> find(const std::string& key) const;

  [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const;
  [[nodiscard]] double get_double(const std::string& key, double fallback) const;
  [[nodiscard]] long long get_int(const std::string& key, long long fallback) const;
  [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const;
  [[nodiscard]] std::vector<double> get_doubles(const std::string& key,
                                                const std::vector<double>& fallback) const;

  /// Entries with the given "section." prefix stripped; an empty section
  /// selects the top-level keys.
  [[nodiscard]] std::map<std::string, std::string> section(const std::string& name) const;

  [[nodiscard]] const std::map<std::string, std::string>& entries() const { return entries_; }

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace fleetsurv
