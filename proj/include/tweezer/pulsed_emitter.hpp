#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

namespace tweezer {

/// Excitation timing within one dipole-off half period. All times are
/// measured from the falling edge of the trap light.
struct PulseChain {
  double eom_duration = 3.5e-9;     // FWHM of the field envelope
  double eom_rise_time = 1e-9;      // raised-cosine edge, 0 for a square pulse
  double eom_extinction_intensity = 800;  // <= 0 or inf disables leakage
  double aom_window = 30e-9;
  double aom_open_time = 25e-9;
  double eom_pulse_time = 45e-9;    // half-maximum of the rising edge
  double detection_open_time = 25e-9;
  double detection_window = 200e-9;
  double aom_extinction_intensity = 1e6;  // treated as a perfect gate
  double off_phase = 250e-9;        // dipole-off half period

  /// Throws ConfigError unless the EOM pulse sits inside the AOM window and
  /// both the AOM and detection windows sit inside the off phase.
  void validate() const;

  double eom_start() const { return eom_pulse_time - eom_rise_time / 2; }
  double eom_end() const { return eom_pulse_time + eom_duration + eom_rise_time / 2; }
  double aom_close_time() const { return aom_open_time + aom_window; }
  double detection_close_time() const { return detection_open_time + detection_window; }

  /// Field-amplitude floor 1/sqrt(extinction) while the AOM is open.
  double leakage_amplitude() const;
  PulseChain without_leakage() const;

  /// Times where the envelope or the detection gate changes form.
  std::vector<double> breakpoints() const;
};

struct ExcitationBeam {
  double waist = 50e-6;       // m
  double peak_power = 2e-3;   // W
  double detuning = 0;        // rad/s

  void validate() const;
};

/// Two-level density matrix on the cycling transition. `coherence` is rho_eg.
struct TwoLevelState {
  double ground_population = 1;
  double excited_population = 0;
  std::complex<double> coherence{};

  double trace() const { return ground_population + excited_population; }
  /// rho_gg rho_ee - |rho_eg|^2, non-negative for a physical state.
  double positivity_margin() const;
};

/// Rabi frequency envelope Omega(t) in rad/s.
double rabi_envelope(const PulseChain& chain, double omega_peak, double t);

struct ObeSolution {
  std::vector<double> times;
  std::vector<TwoLevelState> states;

  /// State at a grid time; throws DomainError if `t` is not on the grid.
  const TwoLevelState& at(double t) const;
};

/// Fixed-step RK4 integration of the driven, damped two-level master
/// equation from t_start to t_end. Steps are shortened to land on every
/// chain breakpoint and on each of `sample_times`.
/// Throws DomainError if step exceeds 1/(20 max(omega_peak, gamma, |detuning|)),
/// ComputationError if positivity or the trace is lost.
ObeSolution evolve_obe(const TwoLevelState& initial, const PulseChain& chain,
                       double omega_peak, double gamma, double detuning, double t_start,
                       double t_end, double step,
                       const std::vector<double>& sample_times = {});

/// Largest step accepted by evolve_obe, scaled by `safety` <= 1.
double obe_step(double omega_peak, double gamma, double detuning = 0, double safety = 0.5);

struct PiPulseCalibration {
  double omega_peak = 0;          // rad/s
  double excited_population = 0;  // right after the EOM pulse
  double pulse_area = 0;          // integral of Omega over the AOM window
};

/// Peak Rabi frequency maximizing the excited population at the end of the
/// EOM pulse. Bracketed golden-section search; throws ComputationError when
/// the response is not unimodal over the bracket.
PiPulseCalibration calibrate_pi_pulse(const PulseChain& chain, double gamma,
                                      double detuning = 0, double relative_tolerance = 1e-6);

/// Probability of at least one spontaneous emission inside the detection
/// window.
double single_photon_window_probability(const PulseChain& chain, double omega_peak,
                                        double gamma, double detuning = 0);

struct JumpOptions {
  std::vector<double> checkpoints;  // times at which rho_ee is averaged
  double step = 0;                  // 0 selects obe_step(omega_peak, gamma, detuning)
  unsigned jobs = 1;
  std::size_t max_jump_samples = 100000;  // cap per sample list
};

struct EmissionStatistics {
  double p0 = 0;
  double p1 = 0;
  double p2plus = 0;
  double p2plus_error = 0;   // binomial standard error
  double mean_emission_time = 0;  // first emission in the window, s
  std::vector<double> jump_times;  // first emission times, in trajectory order
  std::vector<double> single_times;  // trajectories with exactly one emission
  std::vector<std::array<double, 2>> pair_times;  // first two emissions, n >= 2
  std::size_t trajectories = 0;

  std::vector<double> checkpoint_times;
  std::vector<double> checkpoint_excited;  // trajectory average of rho_ee
  std::vector<double> checkpoint_error;    // standard error of that average
};

/// Quantum-trajectory simulation with the waiting-time method: non-unitary
/// evolution until the norm falls below a uniform draw, then a reset to the
/// ground state. Counts emissions inside the detection window.
EmissionStatistics jump_monte_carlo(const PulseChain& chain, double omega_peak, double gamma,
                                    double detuning, std::size_t n_traj, std::uint64_t seed,
                                    const JumpOptions& options = {});

struct EmissionTimeDistribution {
  std::vector<double> times;
  /// Density of the first emission, gamma times the no-jump excited
  /// population; integrates to the window probability.
  std::vector<double> first_photon_density;
  /// Total emission rate gamma * rho_ee(t).
  std::vector<double> emission_rate;
  double window_probability = 0;
};

/// Tabulated over the detection window with grid spacing <= step.
EmissionTimeDistribution emission_time_distribution(const PulseChain& chain,
                                                    double omega_peak, double gamma,
                                                    double detuning = 0, double step = 5e-12);

enum class DurationVerdict { ok, too_long, too_short };

/// ok iff margin_low / (2 dnu) <= tau <= margin_high / gamma.
DurationVerdict pulse_duration_constraints(double tau, double gamma, double hyperfine_splitting,
                                           double margin_low = 1.5, double margin_high = 0.5);

const char* to_string(DurationVerdict verdict);

}  // namespace tweezer
