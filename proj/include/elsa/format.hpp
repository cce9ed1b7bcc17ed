#pragma once

#include <string>

namespace elsa {

/// Real number with 17 significant digits; non-finite values become "null".
std::string format_real(double v);

}  // namespace elsa
