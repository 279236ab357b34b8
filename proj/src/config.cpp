#include "tweezer/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tweezer/errors.hpp"
#include "tweezer/units.hpp"

namespace tweezer {

using json = nlohmann::json;

TimingSequence RunConfig::sequence() const {
  TimingSequence s;
  s.chop_period = chop.period();
  s.duty = chop.duty_cycle;
  s.detection_open = chain.detection_open_time;
  s.detection_length = chain.detection_window;
  s.pulse_time = chain.eom_pulse_time;
  s.pulse_length = chain.eom_duration;
  s.aom_open = chain.aom_open_time;
  s.aom_window = chain.aom_window;
  return s;
}

void RunConfig::validate() const {
  species.validate();
  trap.validate();
  chop.validate();
  if (chop.is_static()) throw ConfigError("chop: duty_cycle must be < 1 for the pulsed sequence");
  dynamics.trajectory.validate();
  if (!(dynamics.temperature > 0)) throw ConfigError("dynamics: temperature must be > 0");
  if (dynamics.atoms < 1) throw ConfigError("dynamics: atoms must be >= 1");
  if (dynamics.survival_points < 2) throw ConfigError("dynamics: survival_points must be >= 2");
  for (const double f : dynamics.frequencies)
    if (!(f > 0)) throw ConfigError("dynamics: frequencies must be > 0");
  chain.validate();
  emitter.excitation.validate();
  if (emitter.trajectories < 1) throw ConfigError("emitter: trajectories must be >= 1");
  for (const auto& d : hbt.detectors) d.validate();
  if (!(hbt.splitter_ratio >= 0 && hbt.splitter_ratio <= 1))
    throw ConfigError("hbt: splitter_ratio must be in [0, 1]");
  if (hbt.pulses < 1) throw ConfigError("hbt: pulses must be >= 1");
  if (!(hbt.bin_width > 0) || !(hbt.range > hbt.bin_width))
    throw ConfigError("hbt: need 0 < bin_width < range");
  if (!(hbt.collection_efficiency >= 0 && hbt.collection_efficiency <= 1))
    throw ConfigError("hbt: collection_efficiency must be in [0, 1]");
  telegraph.occupancy.validate();
  if (!(telegraph.duration >= 0)) throw ConfigError("telegraph: duration must be >= 0");
  if (!(telegraph.background_rate >= 0) || !(telegraph.single_atom_rate >= 0))
    throw ConfigError("telegraph: rates must be >= 0");
  if (!(telegraph.bin_width > 0)) throw ConfigError("telegraph: bin_width must be > 0");
  if (telegraph.k_max < 1) throw ConfigError("telegraph: k_max must be >= 1");
  program.validate();
  const auto violations = validate_sequence(sequence());
  if (!violations.empty()) throw ConfigError("sequence: " + violations.front().message);
  if (!(budget.fiber_rate >= 0)) throw ConfigError("budget: fiber_rate must be >= 0");
  if (!(budget.window_probability > 0 && budget.window_probability <= 1))
    throw ConfigError("budget: window_probability must be in (0, 1]");
}

namespace {

// JSON object view that records which keys were read, so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void quantity(const std::string& key, double& out, Dimension dim) {
    if (const json* v = find(key)) out = to_quantity(*v, key, dim);
  }

  template <class T>
  void integer(const std::string& key, T& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0)
        throw ConfigError(where(key) + ": expected a non-negative integer");
      out = static_cast<T>(v->get<unsigned long long>());
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(where(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(where(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(j_.at(key), where(key));
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  double to_quantity(const json& v, const std::string& key, Dimension dim) const {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      try {
        return parse_quantity(v.get<std::string>(), dim);
      } catch (const ConfigError& e) {
        throw ConfigError(where(key) + ": " + e.what());
      }
    }
    throw ConfigError(where(key) + ": expected a number or a quantity string");
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + where(it.key()) + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_detector(Section s, DetectorModel& d) {
  s.quantity("efficiency", d.efficiency, Dimension::dimensionless);
  s.quantity("dark_rate", d.dark_rate, Dimension::rate);
  s.quantity("time_jitter", d.time_jitter, Dimension::time);
  s.finish();
}

}  // namespace

RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section root(doc, "");

  std::string species_file;
  root.string("species_file", species_file);
  if (species_file.empty()) {
    c.species_file = default_species_path();
  } else {
    c.species_file = species_file;
    if (c.species_file.is_relative() && !base_dir.empty()) c.species_file = base_dir / c.species_file;
  }
  c.species = load_species(c.species_file);

  if (!root.has("trap")) throw ConfigError("missing required section 'trap'");
  {
    Section s = root.child("trap");
    if (!s.has("waist")) throw ConfigError("missing required key 'trap.waist'");
    s.quantity("waist", c.trap.waist_w0, Dimension::length);
    c.trap.wavelength = 810e-9;
    c.trap.power = 6.9e-3;
    s.quantity("wavelength", c.trap.wavelength, Dimension::length);
    s.quantity("average_power", c.trap.power, Dimension::power);
    s.quantity("focus_position", c.trap.focus_position, Dimension::length);
    s.finish();
  }
  if (root.has("chop")) {
    Section s = root.child("chop");
    s.quantity("frequency", c.chop.frequency, Dimension::frequency);
    s.quantity("duty_cycle", c.chop.duty_cycle, Dimension::dimensionless);
    s.quantity("phase_offset", c.chop.phase_offset, Dimension::time);
    s.finish();
  }
  if (root.has("dynamics")) {
    Section s = root.child("dynamics");
    auto& t = c.dynamics.trajectory;
    s.quantity("temperature", c.dynamics.temperature, Dimension::temperature);
    s.integer("atoms", c.dynamics.atoms);
    s.integer("survival_points", c.dynamics.survival_points);
    s.quantity("time_step", t.time_step, Dimension::time);
    s.quantity("max_time", t.max_time, Dimension::time);
    s.quantity("loss_radius_factor", t.loss_radius_factor, Dimension::dimensionless);
    s.quantity("background_gas_rate", t.background_gas_rate, Dimension::rate);
    s.quantity("friction_coefficient", t.friction_coefficient, Dimension::rate);
    if (const json* f = s.find("frequencies")) {
      if (!f->is_array()) throw ConfigError("dynamics.frequencies: expected an array");
      c.dynamics.frequencies.clear();
      for (const auto& v : *f)
        c.dynamics.frequencies.push_back(s.to_quantity(v, "frequencies", Dimension::frequency));
    }
    s.finish();
  }
  if (root.has("pulse_chain")) {
    Section s = root.child("pulse_chain");
    auto& p = c.chain;
    s.quantity("eom_duration", p.eom_duration, Dimension::time);
    s.quantity("eom_rise_time", p.eom_rise_time, Dimension::time);
    s.quantity("eom_extinction_intensity", p.eom_extinction_intensity, Dimension::dimensionless);
    s.quantity("aom_window", p.aom_window, Dimension::time);
    s.quantity("aom_open_time", p.aom_open_time, Dimension::time);
    s.quantity("eom_pulse_time", p.eom_pulse_time, Dimension::time);
    s.quantity("detection_open_time", p.detection_open_time, Dimension::time);
    s.quantity("detection_window", p.detection_window, Dimension::time);
    s.quantity("aom_extinction_intensity", p.aom_extinction_intensity, Dimension::dimensionless);
    s.finish();
  }
  if (root.has("emitter")) {
    Section s = root.child("emitter");
    auto& e = c.emitter.excitation;
    s.quantity("waist", e.waist, Dimension::length);
    s.quantity("peak_power", e.peak_power, Dimension::power);
    s.quantity("detuning", e.detuning, Dimension::angular_frequency);
    s.integer("trajectories", c.emitter.trajectories);
    s.finish();
  }
  if (root.has("hbt")) {
    Section s = root.child("hbt");
    if (const json* d = s.find("detectors")) {
      if (!d->is_array() || d->size() != 2) throw ConfigError("hbt.detectors: expected two detectors");
      for (std::size_t i = 0; i < 2; ++i)
        read_detector(Section((*d)[i], "hbt.detectors[" + std::to_string(i) + "]"), c.hbt.detectors[i]);
    }
    s.quantity("splitter_ratio", c.hbt.splitter_ratio, Dimension::dimensionless);
    s.integer("pulses", c.hbt.pulses);
    s.quantity("bin_width", c.hbt.bin_width, Dimension::time);
    s.quantity("range", c.hbt.range, Dimension::time);
    s.quantity("collection_efficiency", c.hbt.collection_efficiency, Dimension::dimensionless);
    s.finish();
  }
  if (root.has("telegraph")) {
    Section s = root.child("telegraph");
    auto& o = c.telegraph.occupancy;
    s.quantity("loading_rate", o.loading_rate, Dimension::rate);
    s.quantity("loss_rate", o.loss_rate, Dimension::rate);
    s.boolean("blockade", o.blockade);
    s.quantity("duration", c.telegraph.duration, Dimension::time);
    s.quantity("background_rate", c.telegraph.background_rate, Dimension::rate);
    s.quantity("single_atom_rate", c.telegraph.single_atom_rate, Dimension::rate);
    s.quantity("bin_width", c.telegraph.bin_width, Dimension::time);
    s.integer("k_max", c.telegraph.k_max);
    s.finish();
  }
  if (root.has("program")) {
    Section s = root.child("program");
    auto& p = c.program;
    s.quantity("generation_duration", p.generation_duration, Dimension::time);
    s.quantity("verify_time", p.verify_time, Dimension::time);
    s.quantity("full_reload_time", p.full_reload_time, Dimension::time);
    s.quantity("survival_probability", p.survival_probability, Dimension::dimensionless);
    s.finish();
  }
  if (root.has("budget")) {
    Section s = root.child("budget");
    s.quantity("fiber_rate", c.budget.fiber_rate, Dimension::rate);
    s.quantity("window_probability", c.budget.window_probability, Dimension::dimensionless);
    s.quantity("target_flux", c.budget.target_flux, Dimension::rate);
    s.finish();
  }
  if (const json* v = root.find("seed")) {
    if (!v->is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
    c.seed = v->get<std::uint64_t>();
  }
  std::string out;
  root.string("output_dir", out);
  if (!out.empty()) c.output_dir = out;
  root.integer("jobs", c.jobs);
  root.finish();

  c.chain.off_phase = (1 - c.chop.duty_cycle) * c.chop.period();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

}  // namespace tweezer
