#include "tweezer/units.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <string>

#include "tweezer/errors.hpp"

namespace tweezer {

const char* to_string(Dimension d) {
  switch (d) {
    case Dimension::length: return "length";
    case Dimension::power: return "power";
    case Dimension::time: return "time";
    case Dimension::frequency: return "frequency";
    case Dimension::rate: return "rate";
    case Dimension::temperature: return "temperature";
    case Dimension::angular_frequency: return "angular frequency";
    case Dimension::dimensionless: return "dimensionless";
  }
  return "unknown";
}

namespace {

struct Unit {
  std::string_view symbol;
  Dimension dim;
  double factor;
};

constexpr std::array kUnits{
    Unit{"m", Dimension::length, 1},          Unit{"mm", Dimension::length, 1e-3},
    Unit{"um", Dimension::length, 1e-6},      Unit{"µm", Dimension::length, 1e-6},
    Unit{"nm", Dimension::length, 1e-9},      Unit{"W", Dimension::power, 1},
    Unit{"mW", Dimension::power, 1e-3},       Unit{"uW", Dimension::power, 1e-6},
    Unit{"s", Dimension::time, 1},            Unit{"ms", Dimension::time, 1e-3},
    Unit{"us", Dimension::time, 1e-6},        Unit{"µs", Dimension::time, 1e-6},
    Unit{"ns", Dimension::time, 1e-9},        Unit{"ps", Dimension::time, 1e-12},
    Unit{"Hz", Dimension::frequency, 1},      Unit{"kHz", Dimension::frequency, 1e3},
    Unit{"MHz", Dimension::frequency, 1e6},   Unit{"GHz", Dimension::frequency, 1e9},
    Unit{"/s", Dimension::rate, 1},           Unit{"1/s", Dimension::rate, 1},
    Unit{"/ms", Dimension::rate, 1e3},        Unit{"K", Dimension::temperature, 1},
    Unit{"mK", Dimension::temperature, 1e-3}, Unit{"uK", Dimension::temperature, 1e-6},
    Unit{"µK", Dimension::temperature, 1e-6},
    Unit{"rad/s", Dimension::angular_frequency, 1},
    Unit{"%", Dimension::dimensionless, 1e-2},
};

bool compatible(Dimension unit, Dimension expected) {
  // Counting rates may also be written in Hz.
  return unit == expected || (expected == Dimension::rate && unit == Dimension::frequency);
}

}  // namespace

double parse_quantity(std::string_view text, Dimension expected) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  const std::string_view s = trim(text);
  double value = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || !std::isfinite(value))
    throw ConfigError("cannot parse quantity '" + std::string(text) + "'");
  const std::string_view unit = trim(std::string_view(end, static_cast<std::size_t>(s.data() + s.size() - end)));
  if (unit.empty()) return value;
  for (const auto& u : kUnits) {
    if (u.symbol != unit) continue;
    if (!compatible(u.dim, expected))
      throw ConfigError("unit '" + std::string(unit) + "' is a " + to_string(u.dim) + ", expected " +
                        to_string(expected));
    return value * u.factor;
  }
  throw ConfigError("unknown unit '" + std::string(unit) + "' in '" + std::string(text) + "'");
}

}  // namespace tweezer
