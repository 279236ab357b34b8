#pragma once

#include <string_view>

namespace tweezer {

enum class Dimension { length, power, time, frequency, rate, temperature, angular_frequency, dimensionless };

const char* to_string(Dimension d);

/// Parses "13.8 mW", "1.4 um", "500 ns", "2 MHz" and the like into SI.
/// A bare number is taken as SI. Throws ConfigError on a malformed string or
/// a unit of the wrong dimension.
double parse_quantity(std::string_view text, Dimension expected);

}  // namespace tweezer
