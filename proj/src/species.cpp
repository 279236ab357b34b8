#include "tweezer/species.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "tweezer/constants.hpp"
#include "tweezer/errors.hpp"

namespace tweezer {

void AtomSpecies::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0) || !std::isfinite(v))
      throw ConfigError(std::string("species: ") + what + " must be > 0");
  };
  positive(mass, "mass");
  positive(d1_wavelength, "d1_wavelength");
  positive(d2_wavelength, "d2_wavelength");
  positive(d1_linewidth, "d1_linewidth");
  positive(d2_linewidth, "d2_linewidth");
  positive(excited_lifetime, "excited_lifetime");
  positive(saturation_intensity_cycling, "saturation_intensity_cycling");
  positive(excited_hyperfine_splitting, "excited_hyperfine_splitting");
  if (!(d1_wavelength > d2_wavelength))
    throw ConfigError("species: d1_wavelength must exceed d2_wavelength");
  if (std::abs(excited_lifetime * d2_linewidth - 1.0) > 0.05)
    throw ConfigError("species: excited_lifetime inconsistent with 1/d2_linewidth");
}

double AtomSpecies::natural_linewidth_hz() const {
  return d2_linewidth / (2 * phys::pi);
}

AtomSpecies AtomSpecies::rubidium87() {
  AtomSpecies s;
  s.name = "Rb87";
  s.mass = 86.909180527 * phys::amu;
  s.d1_wavelength = 794.978851156e-9;
  s.d2_wavelength = 780.241209686e-9;
  s.d1_linewidth = 2 * phys::pi * 5.7500e6;
  s.d2_linewidth = 2 * phys::pi * 6.0666e6;
  s.excited_lifetime = 26.2348e-9;
  s.saturation_intensity_cycling = 16.6933;
  s.excited_hyperfine_splitting = 266.650e6;
  return s;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size())
    throw ConfigError("species: key '" + key + "' has non-numeric value '" + value + "'");
  return v;
}

}  // namespace

AtomSpecies parse_species(std::istream& in) {
  AtomSpecies s;
  const std::map<std::string, double AtomSpecies::*> numeric = {
      {"mass", &AtomSpecies::mass},
      {"d1_wavelength", &AtomSpecies::d1_wavelength},
      {"d2_wavelength", &AtomSpecies::d2_wavelength},
      {"d1_linewidth", &AtomSpecies::d1_linewidth},
      {"d2_linewidth", &AtomSpecies::d2_linewidth},
      {"excited_lifetime", &AtomSpecies::excited_lifetime},
      {"saturation_intensity_cycling", &AtomSpecies::saturation_intensity_cycling},
      {"excited_hyperfine_splitting", &AtomSpecies::excited_hyperfine_splitting},
  };
  std::map<std::string, bool> seen;
  bool have_version = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("species: line " + std::to_string(lineno) + " lacks '='");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (seen[key]) throw ConfigError("species: duplicate key '" + key + "'");
    seen[key] = true;
    if (key == "format_version") {
      if (to_double(key, value) != kSpeciesFormatVersion)
        throw ConfigError("species: unsupported format_version " + value);
      have_version = true;
    } else if (key == "name") {
      s.name = value;
    } else if (auto it = numeric.find(key); it != numeric.end()) {
      s.*(it->second) = to_double(key, value);
    } else {
      throw ConfigError("species: unknown key '" + key + "'");
    }
  }
  if (!have_version) throw ConfigError("species: missing format_version");
  for (const auto& [key, member] : numeric)
    if (!seen[key]) throw ConfigError("species: missing key '" + key + "'");
  s.validate();
  return s;
}

AtomSpecies load_species(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("species: cannot open " + path.string());
  return parse_species(in);
}

void write_species(std::ostream& out, const AtomSpecies& s) {
  std::ostringstream body;
  body.precision(17);
  body << "format_version = " << kSpeciesFormatVersion << '\n'
       << "name = " << s.name << '\n'
       << "mass = " << s.mass << '\n'
       << "d1_wavelength = " << s.d1_wavelength << '\n'
       << "d2_wavelength = " << s.d2_wavelength << '\n'
       << "d1_linewidth = " << s.d1_linewidth << '\n'
       << "d2_linewidth = " << s.d2_linewidth << '\n'
       << "excited_lifetime = " << s.excited_lifetime << '\n'
       << "saturation_intensity_cycling = " << s.saturation_intensity_cycling << '\n'
       << "excited_hyperfine_splitting = " << s.excited_hyperfine_splitting << '\n';
  out << body.str();
}

std::filesystem::path default_species_path() {
  return std::filesystem::path(TWEEZER_DATA_DIR) / "rb87.species";
}

}  // namespace tweezer
