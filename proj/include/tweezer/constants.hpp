#pragma once

#include <numbers>

namespace tweezer::phys {

inline constexpr double pi = std::numbers::pi;
inline constexpr double c = 299'792'458.0;             // m/s
inline constexpr double hbar = 1.054'571'817e-34;      // J s
inline constexpr double kB = 1.380'649e-23;            // J/K
inline constexpr double amu = 1.660'539'066'60e-27;    // kg

}  // namespace tweezer::phys
