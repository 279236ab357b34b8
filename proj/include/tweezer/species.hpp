#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

namespace tweezer {

/// Alkali constants entering the two-line light-shift model and the emitter.
struct AtomSpecies {
  std::string name;
  double mass = 0;                          // kg
  double d1_wavelength = 0;                 // m
  double d2_wavelength = 0;                 // m
  double d1_linewidth = 0;                  // rad/s
  double d2_linewidth = 0;                  // rad/s
  double excited_lifetime = 0;              // s
  double saturation_intensity_cycling = 0;  // W/m^2
  double excited_hyperfine_splitting = 0;   // Hz, F'=2 <-> F'=3

  /// Throws ConfigError on the first broken invariant.
  void validate() const;

  /// D2 natural linewidth in Hz (FWHM of the emission line).
  double natural_linewidth_hz() const;

  /// 87Rb, D-line data from Steck's reference tables.
  static AtomSpecies rubidium87();
};

/// Current version of the key-value species file format.
inline constexpr int kSpeciesFormatVersion = 1;

/// Parses the key-value format described in docs/FORMATS.md.
AtomSpecies parse_species(std::istream& in);
AtomSpecies load_species(const std::filesystem::path& path);
void write_species(std::ostream& out, const AtomSpecies& species);

/// Path of the shipped default data file.
std::filesystem::path default_species_path();

}  // namespace tweezer
