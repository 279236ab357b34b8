#pragma once

#include <string>
#include <vector>

namespace tweezer {

/// One chop period. Sub-window times are measured from the dipole-off edge;
/// the trap is on for the first `duty` fraction of the period, which is also
/// the repump window.
struct TimingSequence {
  double chop_period = 500e-9;
  double duty = 0.5;
  double detection_open = 25e-9;
  double detection_length = 200e-9;
  double pulse_time = 45e-9;
  double pulse_length = 3.5e-9;
  double aom_open = 25e-9;
  double aom_window = 30e-9;

  double off_phase() const { return (1 - duty) * chop_period; }
  double pulse_rate() const { return 1 / chop_period; }
};

struct PhaseProgram {
  double generation_duration = 2e-3;
  double verify_time = 20e-3;       // two 10 ms detection bins
  double full_reload_time = 1.0;
  double survival_probability = 0.86;

  void validate() const;
};

struct SequenceViolation {
  std::string window;
  std::string container;
  std::string message;
};

/// Empty when every window sits inside its container.
std::vector<SequenceViolation> validate_sequence(const TimingSequence& seq);

/// floor(generation_duration / chop_period). Throws DomainError for an
/// invalid sequence.
long long pulses_per_phase(const TimingSequence& seq, const PhaseProgram& program);

/// fiber_rate / (pulse_rate * p1).
double collection_efficiency(double fiber_rate, double pulse_rate, double p1);

/// Renewal-cycle average: fiber_rate * T_gen / (T_gen + E[T_load]) with
/// E[T_load] = p_s verify_time + (1 - p_s) full_reload_time.
double average_flux(double fiber_rate, const PhaseProgram& program);

/// Survival probability giving `target_flux`, by bisection. Throws
/// DomainError when the target lies outside [flux(0), flux(1)].
double solve_survival(double fiber_rate, const PhaseProgram& program, double target_flux,
                      double tolerance = 1e-9);

/// Photons per second and per MHz of natural linewidth.
double spectral_brightness(double flux, double natural_linewidth_hz);

struct BudgetReport {
  long long pulses_per_phase = 0;
  double pulse_rate = 0;             // 1/s
  double fiber_photon_rate = 0;      // 1/s
  double collection_efficiency = 0;
  double survival_probability = 0;
  double average_flux = 0;           // 1/s
  double spectral_brightness = 0;    // 1/(s MHz)
};

BudgetReport budget_report(const TimingSequence& seq, const PhaseProgram& program,
                           double fiber_rate, double p1, double natural_linewidth_hz);

}  // namespace tweezer
