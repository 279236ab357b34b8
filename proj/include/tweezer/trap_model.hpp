#pragma once

#include <array>

#include "tweezer/species.hpp"

namespace tweezer {

using Vec3 = std::array<double, 3>;

/// Focused Gaussian trap beam. `focus_position` is the axial coordinate of
/// the waist; intensities are evaluated at axial coordinate z in the same frame.
struct BeamGeometry {
  double waist_w0 = 0;        // m
  double wavelength = 0;      // m
  double power = 0;           // W
  double focus_position = 0;  // m

  void validate() const;
  BeamGeometry with_power(double p) const {
    BeamGeometry g = *this;
    g.power = p;
    return g;
  }
};

struct TrapParameters {
  double depth_energy = 0;       // J, |U(0,0)|
  double depth_temperature = 0;  // K
  double radial_frequency = 0;   // Hz
  double axial_frequency = 0;    // Hz
  double rayleigh_range = 0;     // m
};

/// pi w0^2 / lambda.
double rayleigh_range(double waist_w0, double wavelength);

/// 1/e^2 intensity radius at axial distance z from the focus.
double beam_radius(const BeamGeometry& geometry, double z);

/// Gaussian-beam intensity (W/m^2) at radius r and axial coordinate z.
double beam_intensity(const BeamGeometry& geometry, double r, double z);

/// Ground-state light shift per unit intensity (J per W/m^2) at the given
/// trap wavelength, from the D1/D2 two-line model with counter-rotating
/// terms. Negative for red detuning.
/// Throws UnsupportedRegime unless the light is red of both D lines.
double light_shift_coefficient(const AtomSpecies& species, double wavelength);

/// Dipole potential energy (J) at (r, z).
double dipole_potential(const AtomSpecies& species, const BeamGeometry& geometry,
                        double r, double z);

/// |U(0, focus)| / kB, in kelvin.
double trap_depth(const AtomSpecies& species, const BeamGeometry& geometry);

/// Harmonic frequencies (Hz) of the trap at the geometry's power.
/// Throws DomainError when the depth vanishes.
std::array<double, 2> trap_frequencies(const AtomSpecies& species,
                                       const BeamGeometry& geometry);

TrapParameters trap_parameters(const AtomSpecies& species, const BeamGeometry& geometry);

/// Precomputed Gaussian-trap potential for the inner loop of the dynamics.
/// Coordinates are Cartesian with z along the beam, origin at the focus.
class GaussianTrap {
 public:
  GaussianTrap(const AtomSpecies& species, const BeamGeometry& geometry);

  double depth() const { return depth_; }  // J, positive
  double mass() const { return mass_; }
  double waist() const { return w0_; }
  double rayleigh() const { return zr_; }

  double potential(const Vec3& x) const;
  /// Potential energy and acceleration (force / mass) in one evaluation.
  double potential_and_acceleration(const Vec3& x, Vec3& accel) const;

 private:
  double depth_;
  double mass_;
  double w0_;
  double zr_;
  double inv_w0sq_;
  double inv_zrsq_;
};

}  // namespace tweezer
