#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace rtgam {

// Plain-text configuration made of `section.key = value` lines. Blank lines
// and lines starting with '#' are ignored. Later assignments win, so command
// line overrides are applied with set() after load().
class KeyValueConfig {
 public:
  static KeyValueConfig load(const std::filesystem::path& path);
  static KeyValueConfig parse(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace rtgam
