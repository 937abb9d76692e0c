#pragma once

// Flat TOML-style configuration: [section] headers and `key = value` lines.
// Values are numbers, true/false, "strings" or [number, ...] arrays; '#' starts a comment.
// Keys are addressed as "section.key".

#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "aafwi/io.hpp"

namespace aafwi {

/// Malformed or incomplete configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Config {
 public:
  using Value = std::variant<double, bool, std::string, std::vector<double>>;

  static Config parse(const std::string& text, const std::string& origin = "config") {
    Config c;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string where = origin + ":" + std::to_string(lineno) + ": ";
      line = trim(strip_comment(line));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError(where + "unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        if (!valid_name(section)) throw ConfigError(where + "bad section name '" + section + "'");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
      const std::string key = trim(line.substr(0, eq));
      if (!valid_name(key)) throw ConfigError(where + "bad key '" + key + "'");
      const std::string full = section.empty() ? key : section + "." + key;
      if (c.values_.count(full)) throw ConfigError(where + "duplicate key '" + full + "'");
      c.values_[full] = parse_value(trim(line.substr(eq + 1)), where);
    }
    return c;
  }

  static Config load(const std::filesystem::path& path) {
    std::string text;
    try {
      text = io::read_all(path);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("cannot read config: ") + e.what());
    }
    return parse(text, path.string());
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  double number(const std::string& key) const { return as<double>(key, "a number"); }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  int integer(const std::string& key) const {
    const double v = number(key);
    if (!(std::abs(v) < 2e9) || v != std::floor(v)) throw ConfigError(key + ": expected an integer");
    return static_cast<int>(v);
  }
  int integer(const std::string& key, int fallback) const { return has(key) ? integer(key) : fallback; }

  bool boolean(const std::string& key) const { return as<bool>(key, "true or false"); }
  bool boolean(const std::string& key, bool fallback) const { return has(key) ? boolean(key) : fallback; }

  std::string string(const std::string& key) const { return as<std::string>(key, "a quoted string"); }
  std::string string(const std::string& key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key) const { return as<std::vector<double>>(key, "an array"); }

  void set(const std::string& key, Value v) { values_[key] = std::move(v); }

  /// Rejects keys outside `known` (catches typos that would otherwise fall back to defaults).
  void require_known(const std::set<std::string>& known) const {
    for (const auto& [k, v] : values_)
      if (!known.count(k)) throw ConfigError("unknown key '" + k + "'");
  }

  const std::map<std::string, Value>& values() const { return values_; }

 private:
  template <class T>
  const T& as(const std::string& key, const char* what) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing key '" + key + "'");
    if (const T* v = std::get_if<T>(&it->second)) return *v;
    throw ConfigError(key + ": expected " + what);
  }

  static std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }

  static bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    for (char ch : s)
      if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-')) return false;
    return true;
  }

  static double parse_number(const std::string& s, const std::string& where) {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const char* first = s.data() + (s.size() > 1 && s[0] == '+' ? 1 : 0);
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) throw ConfigError(where + "bad number '" + s + "'");
    return v;
  }

  static Value parse_value(const std::string& s, const std::string& where) {
    if (s.empty()) throw ConfigError(where + "missing value");
    if (s == "true") return true;
    if (s == "false") return false;
    if (s.front() == '"') {
      if (s.size() < 2 || s.back() != '"') throw ConfigError(where + "unterminated string");
      return s.substr(1, s.size() - 2);
    }
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + "unterminated array");
      std::vector<double> out;
      const std::string body = trim(s.substr(1, s.size() - 2));
      if (body.empty()) return out;
      std::istringstream in(body);
      std::string item;
      while (std::getline(in, item, ',')) out.push_back(parse_number(trim(item), where));
      return out;
    }
    return parse_number(s, where);
  }

  std::map<std::string, Value> values_;
};

}  // namespace aafwi
