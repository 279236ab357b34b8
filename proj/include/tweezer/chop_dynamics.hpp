#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tweezer/species.hpp"
#include "tweezer/trap_model.hpp"

namespace tweezer {

/// Square-wave trap modulation. The trap is on during the first
/// `duty_cycle` fraction of each period, counted from `phase_offset`.
/// duty_cycle == 1 is accepted and means an unmodulated trap.
struct ChopWaveform {
  double frequency = 2e6;  // Hz
  double duty_cycle = 0.5;
  double phase_offset = 0;  // s

  void validate() const;
  double period() const { return 1 / frequency; }
  bool is_static() const { return duty_cycle >= 1; }
};

/// 1 while the trap light is on, 0 otherwise.
int chop_state(const ChopWaveform& waveform, double t);

struct TrajectoryConfig {
  double time_step = 0;  // s; 0 selects the largest admissible step
  double max_time = 10e-3;
  double loss_radius_factor = 5;  // in units of (w0, zR)
  double background_gas_rate = 0;
  double friction_coefficient = 0;  // 1/s
  std::uint64_t rng_seed = 1;
  bool record_history = false;  // one sample per chop period

  void validate() const;
};

struct AtomState {
  Vec3 position{};  // m, origin at the beam focus
  Vec3 velocity{};  // m/s
  bool alive = true;
  std::optional<double> loss_time;
};

enum class LossCause { none, escaped, background_gas };

struct TrajectorySample {
  double time;
  Vec3 position;
  Vec3 velocity;
  double energy;  // kinetic + duty-averaged potential, J
};

struct TrajectoryResult {
  AtomState final_state;
  LossCause cause = LossCause::none;
  std::vector<TrajectorySample> history;
  double time_step = 0;  // the step actually used in the on phase
};

/// Largest step allowed for this waveform and trap.
double max_time_step(const ChopWaveform& waveform, const AtomSpecies& species,
                     const BeamGeometry& geometry);

/// Ensemble drawn from the Boltzmann distribution of the harmonic
/// approximation to the full-power (on-phase) trap. Throws DomainError when
/// temperature is not below the trap depth.
std::vector<AtomState> sample_thermal_ensemble(double temperature,
                                               const BeamGeometry& geometry,
                                               const AtomSpecies& species,
                                               std::size_t n, std::uint64_t seed);

/// Integrates one atom in U(r,z) * s(t) with velocity Verlet during the on
/// phases and exact free flight during the off phases. `geometry` carries the
/// on-phase power.
///
/// Loss requires both a positive energy in the duty-averaged potential and a
/// position outside loss_radius_factor * (w0, zR); it is tested at the end of
/// every chop period. Background-gas loss is a Poisson event drawn from
/// config.rng_seed. Throws ConfigError when the step fails the static-trap
/// stability self-test.
TrajectoryResult integrate_trajectory(const AtomState& initial, const ChopWaveform& waveform,
                                      const BeamGeometry& geometry, const AtomSpecies& species,
                                      const TrajectoryConfig& config);

/// Runs the static-trap energy self-test for `time_step`; throws ConfigError
/// when the energy drift exceeds 1e-3 of the depth.
void check_step_stability(const BeamGeometry& geometry, const AtomSpecies& species,
                          double time_step);

struct SurvivalCurve {
  double frequency = 0;
  std::vector<double> times;
  std::vector<double> fraction;
  /// Per-atom loss time from the dynamics alone (no gas loss); empty optional
  /// for atoms that were never lost.
  std::vector<std::optional<double>> loss_times;
};

/// Survival fraction on `n_points` equally spaced times in [0, max_time],
/// multiplied by exp(-background_gas_rate t). Trajectories are seeded from
/// config.rng_seed and the atom index; results do not depend on `jobs`.
SurvivalCurve survival_curve(const std::vector<AtomState>& ensemble,
                             const ChopWaveform& waveform, const BeamGeometry& geometry,
                             const AtomSpecies& species, const TrajectoryConfig& config,
                             std::size_t n_points = 101, unsigned jobs = 1);

struct ExponentialFit {
  double lifetime = 0;   // s
  double amplitude = 0;  // S(0) of the fitted exponential
  double lifetime_error = 0;
  bool ok = false;
  std::string message;
};

/// Least-squares fit of ln S(t) = ln A - t / tau.
ExponentialFit fit_exponential(const std::vector<double>& times,
                               const std::vector<double>& fraction);

struct LifetimePoint {
  double frequency = 0;
  ExponentialFit fit;
  double survival_at_end = 0;
};

/// Fitted 1/e lifetime for every chop frequency. The same initial ensemble is
/// used at every frequency. A failed fit is reported in its point.
std::vector<LifetimePoint> lifetime_vs_chop(const std::vector<double>& frequencies,
                                            const std::vector<AtomState>& ensemble,
                                            const ChopWaveform& waveform_template,
                                            const BeamGeometry& geometry,
                                            const AtomSpecies& species,
                                            const TrajectoryConfig& config,
                                            unsigned jobs = 1);

/// Dominant frequency (Hz) of the x coordinate of a recorded trajectory.
/// Throws ComputationError when no clear spectral peak exists.
double secular_frequency(const std::vector<TrajectorySample>& history);

}  // namespace tweezer
