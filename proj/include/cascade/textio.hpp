#pragma once

#include <cstdio>
#include <string>

namespace cascade {

/// Formats a double with 17 significant digits so that text outputs
/// round-trip bit-exactly and repeated runs are byte-identical.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace cascade
