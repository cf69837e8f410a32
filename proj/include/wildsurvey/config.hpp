#pragma once

// Flat `key = value` configuration files. Blank lines and lines starting
// with '#' are ignored; nested settings use dotted keys (`world.seed`).

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wildsurvey/errors.hpp"
#include "wildsurvey/text.hpp"

namespace wildsurvey {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& source = "config") {
    KeyValueConfig cfg;
    cfg.source_ = source;
    std::vector<std::string> problems;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = text::trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        problems.push_back("line " + std::to_string(lineno) + ": expected key = value");
        continue;
      }
      const std::string key = text::trim(std::string_view(t).substr(0, eq));
      const std::string value = text::trim(std::string_view(t).substr(eq + 1));
      if (key.empty()) {
        problems.push_back("line " + std::to_string(lineno) + ": empty key");
      } else if (!cfg.values_.emplace(key, value).second) {
        problems.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
      }
    }
    if (!problems.empty()) throw ValidationError(source + ": malformed config", problems);
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path);
    return parse(in, path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  std::string get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
      throw ValidationError(source_ + ": missing key '" + key + "'");
    }
    used_.insert(key);
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
  }

  double get_double(const std::string& key) const {
    const auto v = text::parse_double(get_string(key));
    if (!v) throw bad_value(key, "a finite number");
    return *v;
  }

  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  std::optional<double> get_optional_double(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return get_double(key);
  }

  std::int64_t get_int(const std::string& key) const {
    const auto v = text::parse_int(get_string(key));
    if (!v) throw bad_value(key, "an integer");
    return *v;
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string s = get_string(key);
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(s, &pos, 10);
      if (pos == s.size() && s[0] != '-') return v;
    } catch (const std::exception&) {
    }
    throw bad_value(key, "a non-negative integer");
  }

  bool get_bool(const std::string& key) const {
    const std::string s = get_string(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw bad_value(key, "true or false");
  }

  bool get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
  }

  /// Keys present in the file but never read.
  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) out.push_back(k);
    }
    return out;
  }

 private:
  ValidationError bad_value(const std::string& key, const char* expected) const {
    return ValidationError(source_ + ": key '" + key + "' must be " + expected +
                           ", got '" + values_.at(key) + "'");
  }

  std::string source_;
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace wildsurvey
