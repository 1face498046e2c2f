#pragma once

#include <cstdio>
#include <string>

namespace sevplan {

/// Shortest-safe text form of a double: 17 significant digits, so that
/// parsing the text yields the identical bit pattern.
inline std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace sevplan
