#include "csifb/cli/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "csifb/errors.hpp"

namespace csifb::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  std::istringstream in(text);
  std::string line, section;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string at = origin + ":" + std::to_string(no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(at + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(at + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(at + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(at + ": missing key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (c.entries_.count(full)) throw ConfigError(at + ": duplicate key '" + full + "'");
    c.entries_[full] = {trim(line.substr(eq + 1)), at};
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void Config::set(const std::string& key, const std::string& value) { entries_[key] = {value, "command line"}; }

const Config::Entry* Config::find(const std::string& key) const {
  used_.insert(key);
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void Config::bad(const std::string& key, const std::string& why) const {
  throw ConfigError(where(key) + ": key '" + key + "' " + why);
}

std::string Config::where(const std::string& key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? "config" : it->second.origin;
}

bool Config::has(const std::string& key) const { return find(key) != nullptr; }

std::string Config::str(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) throw ConfigError("missing required key '" + key + "'");
  return e->value;
}

std::string Config::str(const std::string& key, const std::string& fallback) const {
  const Entry* e = find(key);
  return e ? e->value : fallback;
}

std::int64_t Config::integer(const std::string& key) const {
  const std::string v = str(key);
  std::int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, "expects an integer, got '" + v + "'");
  return out;
}

std::int64_t Config::integer(const std::string& key, std::int64_t fallback) const {
  return has(key) ? integer(key) : fallback;
}

std::size_t Config::count(const std::string& key, std::size_t fallback, std::size_t lo, std::size_t hi) const {
  if (!has(key)) return fallback;
  const std::string v = str(key);
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, "expects a non-negative integer, got '" + v + "'");
  if (out < lo || out > hi) {
    bad(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " + v);
  }
  return out;
}

std::uint64_t Config::u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string v = str(key);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, "expects an unsigned 64-bit integer, got '" + v + "'");
  return out;
}

double Config::real(const std::string& key) const {
  const std::string v = str(key);
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, "expects a number, got '" + v + "'");
  return out;
}

double Config::real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }

bool Config::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = str(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key, "expects true/false, got '" + v + "'");
}

std::vector<std::string> Config::list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(str(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::string> Config::list(const std::string& key, const std::vector<std::string>& fallback) const {
  return has(key) ? list(key) : fallback;
}

std::vector<std::size_t> Config::counts(const std::string& key, const std::vector<std::size_t>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<std::size_t> out;
  for (const auto& s : list(key)) {
    std::size_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) bad(key, "expects a list of counts, got '" + s + "'");
    out.push_back(v);
  }
  return out;
}

void Config::reject_unused() const {
  for (const auto& [key, e] : entries_) {
    if (!used_.count(key)) throw ConfigError(e.origin + ": unknown key '" + key + "'");
  }
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [key, e] : entries_) out += key + "=" + e.value + "\n";
  return out;
}

std::string Config::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) h = (h ^ c) * 0x100000001b3ULL;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace csifb::cli
