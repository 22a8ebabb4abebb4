#include "pcm/kv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pcm/errors.hpp"

namespace pcm {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(text);
  while (std::getline(ss, cur, ',')) {
    std::string t = trim(cur);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

KvFile KvFile::parse(std::istream& in, const std::string& origin) {
  KvFile kv;
  kv.origin_ = origin;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value', got '" + t + "'");
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (kv.values_.count(key)) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": duplicate key '" + key + "'");
    }
    kv.values_[key] = value;
    kv.order_.push_back(key);
  }
  return kv;
}

KvFile KvFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  return parse(in, path.string());
}

bool KvFile::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& KvFile::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw ConfigError(origin_ + ": missing required key '" + key + "'");
  }
  return it->second;
}

std::string KvFile::get_or(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KvFile::get_double(const std::string& key) const {
  const std::string& v = get(key);
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(origin_ + ": key '" + key + "' is not a number: '" + v + "'");
  }
  return out;
}

std::int64_t KvFile::get_int(const std::string& key) const {
  const std::string& v = get(key);
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(origin_ + ": key '" + key + "' is not an integer: '" + v + "'");
  }
  return out;
}

void KvFile::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) order_.push_back(key);
  values_[key] = value;
}

void KvFile::set_double(const std::string& key, double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  set(key, std::string(buf, ptr));
}

void KvFile::set_int(const std::string& key, std::int64_t value) {
  set(key, std::to_string(value));
}

std::string KvFile::dump() const {
  std::string out;
  for (const auto& k : order_) {
    out += k;
    out += " = ";
    out += values_.at(k);
    out += "\n";
  }
  return out;
}

void KvFile::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path.string());
  out << dump();
}

std::int64_t parse_duration_seconds(const std::string& text) {
  std::string t = trim(text);
  if (t.empty()) throw ConfigError("empty duration");
  double mult = 1.0;
  char suffix = t.back();
  if (suffix == 's' || suffix == 'm' || suffix == 'h' || suffix == 'd') {
    switch (suffix) {
      case 's': mult = 1.0; break;
      case 'm': mult = 60.0; break;
      case 'h': mult = 3600.0; break;
      case 'd': mult = 86400.0; break;
    }
    t.pop_back();
    t = trim(t);
  }
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError("bad duration '" + text + "' (expected e.g. 24h, 90m, 30s, 2d)");
  }
  return static_cast<std::int64_t>(std::llround(value * mult));
}

}  // namespace pcm
