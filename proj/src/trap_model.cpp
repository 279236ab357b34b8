#include "tweezer/trap_model.hpp"

#include <cmath>

#include "tweezer/constants.hpp"
#include "tweezer/errors.hpp"

namespace tweezer {

void BeamGeometry::validate() const {
  if (!(wavelength > 0)) throw ConfigError("beam: wavelength must be > 0");
  if (!(waist_w0 > wavelength / 2)) throw ConfigError("beam: waist must exceed wavelength/2");
  if (!(power >= 0)) throw ConfigError("beam: power must be >= 0");
  if (!std::isfinite(focus_position)) throw ConfigError("beam: focus_position must be finite");
}

double rayleigh_range(double waist_w0, double wavelength) {
  if (!(waist_w0 > 0) || !(wavelength > 0))
    throw DomainError("rayleigh_range: waist and wavelength must be positive");
  return phys::pi * waist_w0 * waist_w0 / wavelength;
}

double beam_radius(const BeamGeometry& g, double z) {
  const double zeta = (z - g.focus_position) / rayleigh_range(g.waist_w0, g.wavelength);
  return g.waist_w0 * std::sqrt(1 + zeta * zeta);
}

double beam_intensity(const BeamGeometry& g, double r, double z) {
  const double w = beam_radius(g, z);
  return 2 * g.power / (phys::pi * w * w) * std::exp(-2 * r * r / (w * w));
}

double light_shift_coefficient(const AtomSpecies& s, double wavelength) {
  if (!(wavelength > s.d1_wavelength) || !(wavelength > s.d2_wavelength))
    throw UnsupportedRegime(
        "dipole_potential: trap light must be red-detuned from both D lines");
  const double omega = 2 * phys::pi * phys::c / wavelength;
  const double w1 = 2 * phys::pi * phys::c / s.d1_wavelength;
  const double w2 = 2 * phys::pi * phys::c / s.d2_wavelength;
  const double line1 = s.d1_linewidth / (w1 * w1 * w1) * (1 / (w1 - omega) + 1 / (w1 + omega));
  const double line2 = s.d2_linewidth / (w2 * w2 * w2) * (1 / (w2 - omega) + 1 / (w2 + omega));
  // Line strengths 1/3 (D1) and 2/3 (D2) of the total ground-state coupling.
  return -(3 * phys::pi * phys::c * phys::c / 2) * (line1 / 3 + 2 * line2 / 3);
}

double dipole_potential(const AtomSpecies& species, const BeamGeometry& geometry,
                        double r, double z) {
  return light_shift_coefficient(species, geometry.wavelength) *
         beam_intensity(geometry, r, z);
}

double trap_depth(const AtomSpecies& species, const BeamGeometry& geometry) {
  return std::abs(dipole_potential(species, geometry, 0, geometry.focus_position)) / phys::kB;
}

std::array<double, 2> trap_frequencies(const AtomSpecies& species,
                                       const BeamGeometry& geometry) {
  const double u0 = trap_depth(species, geometry) * phys::kB;
  if (!(u0 > 0)) throw DomainError("trap_frequencies: trap depth is zero");
  const double zr = rayleigh_range(geometry.waist_w0, geometry.wavelength);
  const double m = species.mass;
  const double w0 = geometry.waist_w0;
  const double radial = std::sqrt(4 * u0 / (m * w0 * w0)) / (2 * phys::pi);
  const double axial = std::sqrt(2 * u0 / (m * zr * zr)) / (2 * phys::pi);
  return {radial, axial};
}

TrapParameters trap_parameters(const AtomSpecies& species, const BeamGeometry& geometry) {
  TrapParameters p;
  p.depth_temperature = trap_depth(species, geometry);
  p.depth_energy = p.depth_temperature * phys::kB;
  const auto [fr, fz] = trap_frequencies(species, geometry);
  p.radial_frequency = fr;
  p.axial_frequency = fz;
  p.rayleigh_range = rayleigh_range(geometry.waist_w0, geometry.wavelength);
  return p;
}

GaussianTrap::GaussianTrap(const AtomSpecies& species, const BeamGeometry& geometry)
    : depth_(trap_depth(species, geometry) * phys::kB),
      mass_(species.mass),
      w0_(geometry.waist_w0),
      zr_(rayleigh_range(geometry.waist_w0, geometry.wavelength)),
      inv_w0sq_(1 / (w0_ * w0_)),
      inv_zrsq_(1 / (zr_ * zr_)) {}

double GaussianTrap::potential(const Vec3& x) const {
  const double q = 1 + x[2] * x[2] * inv_zrsq_;
  const double r2 = x[0] * x[0] + x[1] * x[1];
  return -depth_ * std::exp(-2 * r2 * inv_w0sq_ / q) / q;
}

double GaussianTrap::potential_and_acceleration(const Vec3& x, Vec3& accel) const {
  // U = -U0 g,  g = exp(-2 r^2 / (w0^2 q)) / q,  q = 1 + z^2/zR^2.
  const double q = 1 + x[2] * x[2] * inv_zrsq_;
  const double inv_q = 1 / q;
  const double r2 = x[0] * x[0] + x[1] * x[1];
  const double s = 2 * r2 * inv_w0sq_ * inv_q;
  const double g = std::exp(-s) * inv_q;
  const double scale = depth_ * g / mass_;
  const double radial = -4 * inv_w0sq_ * inv_q;
  accel[0] = scale * radial * x[0];
  accel[1] = scale * radial * x[1];
  accel[2] = scale * 2 * x[2] * inv_zrsq_ * inv_q * (s - 1);
  return -depth_ * g;
}

}  // namespace tweezer
