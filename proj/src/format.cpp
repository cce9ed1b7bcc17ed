#include "elsa/format.hpp"

#include <cmath>
#include <cstdio>

namespace elsa {

std::string format_real(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace elsa
