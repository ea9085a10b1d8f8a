#pragma once

#include <cstdio>
#include <string>

namespace slope {

/// Round-trip safe text for a double (17 significant digits).
inline std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace slope
