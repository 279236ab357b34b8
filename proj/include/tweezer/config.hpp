#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tweezer/chop_dynamics.hpp"
#include "tweezer/photon_stream.hpp"
#include "tweezer/pulsed_emitter.hpp"
#include "tweezer/sequence_budget.hpp"
#include "tweezer/species.hpp"
#include "tweezer/telegraph.hpp"
#include "tweezer/trap_model.hpp"

namespace tweezer {

struct DynamicsSettings {
  double temperature = 100e-6;  // K
  std::size_t atoms = 1000;
  std::vector<double> frequencies{0.3e6, 0.6e6, 1e6, 2e6};
  std::size_t survival_points = 101;
  TrajectoryConfig trajectory;
};

struct EmitterSettings {
  ExcitationBeam excitation;
  std::size_t trajectories = 100000;
};

struct HbtSettings {
  std::array<DetectorModel, 2> detectors{};
  double splitter_ratio = 0.5;
  std::uint64_t pulses = 1000000000ULL;
  double bin_width = 8e-9;
  double range = 3e-6;
  double collection_efficiency = 0;  // 0: take the budget value
};

struct TelegraphSettings {
  OccupancyModel occupancy;
  double duration = 3850;         // s
  double background_rate = 2100;  // counts/s
  double single_atom_rate = 5900; // counts/s
  double bin_width = 10e-3;       // s
  int k_max = 2;
};

struct BudgetSettings {
  double fiber_rate = 13500;          // photons/s
  double window_probability = 0.999;  // p1 in the collection efficiency
  double target_flux = 170;           // photons/s; <= 0 keeps program.survival_probability
};

/// Everything a command needs. `trap.power` is the time-averaged power; the
/// on-phase power is trap.power / chop.duty_cycle.
struct RunConfig {
  std::filesystem::path species_file;
  AtomSpecies species;
  BeamGeometry trap;
  ChopWaveform chop;
  DynamicsSettings dynamics;
  PulseChain chain;
  EmitterSettings emitter;
  HbtSettings hbt;
  TelegraphSettings telegraph;
  PhaseProgram program;
  BudgetSettings budget;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  unsigned jobs = 1;

  BeamGeometry on_phase_beam() const { return trap.with_power(trap.power / chop.duty_cycle); }
  TimingSequence sequence() const;
  /// Validates every module invariant; throws ConfigError.
  void validate() const;
};

/// Parses the JSON run configuration. Unknown keys and a missing trap waist
/// are ConfigErrors. Relative species paths resolve against the config file.
RunConfig parse_config(const std::string& json_text,
                       const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

}  // namespace tweezer
