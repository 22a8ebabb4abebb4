#pragma once

// Internal helpers shared by the persistence code paths. Doubles are stored
// as hex-float strings so round trips are bit-exact and digests are stable.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "pcm/errors.hpp"

namespace pcm::detail {

inline std::string hex_from_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

inline double double_from_hex(const std::string& s) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + s.size()) {
    throw ParseError("bad float literal '" + s + "'");
  }
  return v;
}

inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace pcm::detail
