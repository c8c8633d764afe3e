#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace csifb::cli {

// Line-based key=value settings with [section] headers. Keys are stored as
// "section.key". Reads are tracked so leftover (unknown) keys can be reported.
class Config {
 public:
  // Throws ConfigError naming the line on malformed input or duplicate keys.
  static Config parse(const std::string& text, const std::string& origin = "<config>");
  static Config load(const std::string& path);

  // Command-line overrides win over file values.
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  std::string str(const std::string& key) const;  // throws ConfigError when missing
  std::string str(const std::string& key, const std::string& fallback) const;
  std::int64_t integer(const std::string& key) const;
  std::int64_t integer(const std::string& key, std::int64_t fallback) const;
  // Non-negative integer; range-checked.
  std::size_t count(const std::string& key, std::size_t fallback, std::size_t lo = 0,
                    std::size_t hi = static_cast<std::size_t>(-1)) const;
  std::uint64_t u64(const std::string& key, std::uint64_t fallback) const;
  double real(const std::string& key, double fallback) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key, bool fallback) const;
  // Comma-separated list; empty items are dropped.
  std::vector<std::string> list(const std::string& key) const;
  std::vector<std::string> list(const std::string& key, const std::vector<std::string>& fallback) const;
  std::vector<std::size_t> counts(const std::string& key, const std::vector<std::size_t>& fallback) const;

  // Throws ConfigError naming the first key that was never read.
  void reject_unused() const;

  // "key=value" lines in key order, including overrides.
  std::string canonical() const;
  // FNV-1a 64 of canonical(), as 16 hex digits.
  std::string hash() const;

  // Where a key came from, for diagnostics: "file:line" or "command line".
  std::string where(const std::string& key) const;

 private:
  struct Entry {
    std::string value;
    std::string origin;
  };
  const Entry* find(const std::string& key) const;
  [[noreturn]] void bad(const std::string& key, const std::string& why) const;

  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> used_;
};

}  // namespace csifb::cli
