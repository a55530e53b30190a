#include "fleetsurv/config.hpp"

#include <fstream>
#include <sstream>

#include "fleetsurv/csv.hpp"
#include "fleetsurv/errors.hpp"

namespace fleetsurv {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig config;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError("config line " + std::to_string(line_no) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) throw UsageError("config line " + std::to_string(line_no) + ": empty key");
    config.entries_[section.empty() ? key : section + "." + key] = value;
  }
  return config;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

bool KeyValueConfig::contains(const std::string& key) const { return entries_.count(key) != 0; }

std::optional<std::string> KeyValueConfig::find(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return find(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  try {
    return csv::parse_double(*v);
  } catch (const DataError&) {
    throw UsageError("config key '" + key + "' expects a number, got '" + *v + "'");
  }
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  try {
    return csv::parse_int(*v);
  } catch (const DataError&) {
    throw UsageError("config key '" + key + "' expects an integer, got '" + *v + "'");
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw UsageError("config key '" + key + "' expects a boolean, got '" + *v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key,
                                                const std::vector<double>& fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto field : csv::split(*v)) {
    const std::string item = trim(std::string(field));
    if (item.empty()) continue;
    try {
      out.push_back(csv::parse_double(item));
    } catch (const DataError&) {
      throw UsageError("config key '" + key + "' expects a comma-separated list of numbers");
    }
  }
  return out;
}

std::map<std::string, std::string> KeyValueConfig::section(const std::string& name) const {
  std::map<std::string, std::string> out;
  for (const auto& [key, value] : entries_) {
    if (name.empty()) {
      if (key.find('.') == std::string::npos) out[key] = value;
    } else if (key.size() > name.size() + 1 && key.compare(0, name.size(), name) == 0 &&
               key[name.size()] == '.') {
      out[key.substr(name.size() + 1)] = value;
    }
  }
  return out;
}

}  // namespace fleetsurv
