#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

namespace a2pr {

// Shortest round-trippable decimal for a 64-bit real; used for every value
// that lands in a CSV or hash so output is reproducible to the byte.
inline std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Bit-exact serialization for checkpoint state (hex float).
inline std::string fmt_real_hex(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

inline double parse_real_hex(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

inline std::string fmt_u64_hex(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline uint64_t parse_u64_hex(const std::string& s) {
  return std::strtoull(s.c_str(), nullptr, 16);
}

inline uint64_t fnv1a(const std::string& text) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace a2pr
