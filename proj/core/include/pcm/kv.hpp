#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace pcm {

// Flat `key = value` config document. Lines starting with '#' and blank
// lines are skipped; keys must be unique; insertion order is preserved for
// deterministic re-serialization.
class KvFile {
 public:
  static KvFile parse(std::istream& in, const std::string& origin = "<stream>");
  static KvFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double value);
  void set_int(const std::string& key, std::int64_t value);

  // keys in insertion order
  const std::vector<std::string>& keys() const { return order_; }

  std::string dump() const;
  void save(const std::filesystem::path& path) const;

  const std::string& origin() const { return origin_; }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
  std::string origin_;
};

// "24h" / "30m" / "10s" / "1.5d" -> seconds (rounded to the nearest second)
std::int64_t parse_duration_seconds(const std::string& text);

// comma-separated list -> trimmed elements; empty input -> empty list
std::vector<std::string> split_list(const std::string& text);

std::string trim(const std::string& s);

}  // namespace pcm
