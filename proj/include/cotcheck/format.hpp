#pragma once

#include <charconv>
#include <cstdio>
#include <string>

namespace cotcheck {

// Shortest round-trip representation; used for every number we write to a
// report so output is reproducible byte for byte.
inline std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

inline std::string format_fixed(double value, int digits) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  return std::string(buf, buf + n);
}

}  // namespace cotcheck
