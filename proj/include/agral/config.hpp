#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace agral {

// Flat "key = value" run configuration, one key per line, '#' comments.
// Unknown keys are rejected at parse time; the echo of a resolved config is
// itself a valid config file.
class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig parse_file(const std::filesystem::path& path);
  static RunConfig parse_text(const std::string& text,
                              const std::filesystem::path& base_dir = ".");

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, std::string value);

  // Throws ConfigError naming the key when it is absent.
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;

  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key) const;
  std::size_t get_size_or(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64_or(const std::string& key, std::uint64_t fallback) const;
  bool get_bool_or(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;

  // Path values are resolved against the config file's directory at parse
  // time, so the echo is location-independent.
  std::filesystem::path get_path(const std::string& key) const;

  // Sorted "key = value" lines; parseable by parse_text.
  std::string echo() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

  // Every documented key, shared with --help.
  static const std::map<std::string, std::string>& key_help();

 private:
  std::map<std::string, std::string> values_;
  std::filesystem::path base_dir_ = ".";
};

}  // namespace agral
