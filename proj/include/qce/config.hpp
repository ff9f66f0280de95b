// qce-rkpm: flat key = value configuration files.
// SPDX-License-Identifier: MIT
#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qce/common.hpp"

namespace qce::cfg {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

// `key = value` lines, # comments, optional [value, lists]. Getters mark keys
// as consumed so finish() can reject typos.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "config") {
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": expected `key = value`, got `" + line + "`");
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty() || value.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": empty key or value");
      if (!c.kv_.emplace(key, value).second)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key `" +
                          key + "`");
    }
    return c;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string str(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing required key `" + key + "`");
    used_.insert(key);
    return it->second;
  }

  std::string str(const std::string& key, const std::string& def) const {
    return has(key) ? str(key) : def;
  }

  Real real(const std::string& key) const { return to_real(key, str(key)); }
  Real real(const std::string& key, Real def) const {
    return has(key) ? real(key) : def;
  }

  int integer(const std::string& key) const {
    const Real v = real(key);
    const int i = static_cast<int>(v);
    if (static_cast<Real>(i) != v)
      throw ConfigError("key `" + key + "`: expected an integer, got `" + str(key) + "`");
    return i;
  }
  int integer(const std::string& key, int def) const {
    return has(key) ? integer(key) : def;
  }

  bool boolean(const std::string& key) const {
    const std::string v = str(key);
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw ConfigError("key `" + key + "`: expected a boolean, got `" + v + "`");
  }
  bool boolean(const std::string& key, bool def) const {
    return has(key) ? boolean(key) : def;
  }

  std::vector<Real> reals(const std::string& key) const {
    std::string v = str(key);
    if (!v.empty() && v.front() == '[') {
      if (v.back() != ']')
        throw ConfigError("key `" + key + "`: unterminated list `" + v + "`");
      v = v.substr(1, v.size() - 2);
    }
    for (char& ch : v)
      if (ch == ',') ch = ' ';
    std::istringstream in(v);
    std::vector<Real> out;
    std::string tok;
    while (in >> tok) out.push_back(to_real(key, tok));
    if (out.empty()) throw ConfigError("key `" + key + "`: empty list");
    return out;
  }
  std::vector<Real> reals(const std::string& key, std::vector<Real> def) const {
    return has(key) ? reals(key) : def;
  }

  std::uint64_t seed(const std::string& key, std::uint64_t def) const {
    if (!has(key)) return def;
    const std::string v = str(key);
    // strtoull would wrap negative input silently, so insist on digits
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("key `" + key + "`: expected a seed, got `" + v + "`");
    return std::strtoull(v.c_str(), nullptr, 10);
  }

  // Reject keys no getter asked for: catches misspelled options.
  void finish() const {
    for (const auto& [key, value] : kv_)
      if (!used_.count(key))
        throw ConfigError("unknown key `" + key + "` (value `" + value + "`)");
  }

 private:
  static Real to_real(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const Real r = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
      throw ConfigError("key `" + key + "`: expected a number, got `" + v + "`");
    return r;
  }

  std::map<std::string, std::string> kv_;
  mutable std::set<std::string> used_;
};

}  // namespace qce::cfg
