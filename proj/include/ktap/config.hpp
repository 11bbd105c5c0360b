#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ktap {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/* Flat key/value configuration: `key = value` lines, optional `[section]`
   headers folded into the key as "section.key", comments with '#' or ';'.
   Values keep inline whitespace; lookups track which keys were consumed so a
   scenario can reject unknown keys by name. */
class Config {
public:
  Config() = default;

  static Config parse(std::istream& in, const std::string& origin = "<stream>") {
    Config cfg;
    cfg.origin_ = origin;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string body = strip_comment(line);
      trim(body);
      if (body.empty()) continue;
      if (body.front() == '[') {
        if (body.back() != ']')
          throw config_error(origin + ":" + std::to_string(lineno) + ": unterminated section header");
        section = body.substr(1, body.size() - 2);
        trim(section);
        if (section.empty())
          throw config_error(origin + ":" + std::to_string(lineno) + ": empty section name");
        continue;
      }
      const std::size_t eq = body.find('=');
      if (eq == std::string::npos)
        throw config_error(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      std::string key = body.substr(0, eq);
      std::string value = body.substr(eq + 1);
      trim(key);
      trim(value);
      if (key.empty())
        throw config_error(origin + ":" + std::to_string(lineno) + ": empty key");
      if (!section.empty()) key = section + "." + key;
      if (cfg.values_.count(key))
        throw config_error(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static Config parse_text(const std::string& text, const std::string& origin = "<text>") {
    std::istringstream in(text);
    return parse(in, origin);
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file " + path);
    return parse(in, path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw config_error(origin_ + ": missing key '" + key + "'");
    used_.insert(it->first);
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
  }

  double get_double(const std::string& key) const {
    return parse_double(key, get_string(key));
  }

  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  long get_int(const std::string& key) const {
    const std::string raw = get_string(key);
    long out = 0;
    const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), out);
    if (ec != std::errc{} || ptr != raw.data() + raw.size())
      throw config_error(origin_ + ": key '" + key + "' is not an integer: '" + raw + "'");
    return out;
  }

  long get_int(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  bool get_bool(const std::string& key) const {
    const std::string raw = get_string(key);
    if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
    if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
    throw config_error(origin_ + ": key '" + key + "' is not a boolean: '" + raw + "'");
  }

  bool get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
  }

  std::vector<double> get_doubles(const std::string& key) const {
    const std::string raw = get_string(key);
    std::vector<double> out;
    std::istringstream in(raw);
    std::string token;
    while (in >> token) out.push_back(parse_double(key, token));
    if (out.empty()) throw config_error(origin_ + ": key '" + key + "' holds no numbers");
    return out;
  }

  /** Keys never read through a getter; scenario loaders treat these as errors. */
  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [key, value] : values_)
      if (!used_.count(key)) out.push_back(key);
    return out;
  }

  void require_all_used() const {
    const std::vector<std::string> stray = unused_keys();
    if (stray.empty()) return;
    std::string msg = origin_ + ": unknown key";
    if (stray.size() > 1) msg += "s";
    for (std::size_t i = 0; i < stray.size(); ++i)
      msg += (i == 0 ? ": '" : ", '") + stray[i] + "'";
    throw config_error(msg);
  }

  const std::string& origin() const { return origin_; }

private:
  double parse_double(const std::string& key, const std::string& raw) const {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), out);
    if (ec != std::errc{} || ptr != raw.data() + raw.size())
      throw config_error(origin_ + ": key '" + key + "' is not a number: '" + raw + "'");
    return out;
  }

  static std::string strip_comment(const std::string& line) {
    const std::size_t pos = line.find_first_of("#;");
    return pos == std::string::npos ? line : line.substr(0, pos);
  }

  static void trim(std::string& s) {
    const char* ws = " \t\r\n";
    const std::size_t a = s.find_first_not_of(ws);
    if (a == std::string::npos) {
      s.clear();
      return;
    }
    const std::size_t b = s.find_last_not_of(ws);
    s = s.substr(a, b - a + 1);
  }

  std::string origin_ = "<empty>";
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace ktap
