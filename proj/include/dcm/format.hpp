#pragma once

#include <string>

namespace dcm {

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

}  // namespace dcm
