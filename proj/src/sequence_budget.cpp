#include "tweezer/sequence_budget.hpp"

#include <cmath>

#include "tweezer/errors.hpp"

namespace tweezer {

void PhaseProgram::validate() const {
  if (!(generation_duration > 0)) throw ConfigError("program: generation_duration must be > 0");
  if (!(verify_time > 0)) throw ConfigError("program: verify_time must be > 0");
  if (!(full_reload_time > 0)) throw ConfigError("program: full_reload_time must be > 0");
  if (!(survival_probability >= 0 && survival_probability <= 1))
    throw ConfigError("program: survival_probability must be in [0, 1]");
}

namespace {

struct Window {
  const char* name;
  double start;
  double end;
};

}  // namespace

std::vector<SequenceViolation> validate_sequence(const TimingSequence& seq) {
  std::vector<SequenceViolation> out;
  if (!(seq.chop_period > 0)) out.push_back({"chop period", "", "chop period must be > 0"});
  if (!(seq.duty > 0 && seq.duty < 1)) out.push_back({"duty", "", "duty must be in (0, 1)"});
  if (!(seq.detection_length > 0)) out.push_back({"detection", "", "detection length must be > 0"});
  if (!(seq.pulse_length > 0)) out.push_back({"pulse", "", "pulse length must be > 0"});
  if (!(seq.aom_window > 0)) out.push_back({"aom window", "", "aom window must be > 0"});
  if (!out.empty()) return out;

  const Window off{"off-phase", 0, seq.off_phase()};
  const Window aom{"aom window", seq.aom_open, seq.aom_open + seq.aom_window};
  const Window det{"detection", seq.detection_open, seq.detection_open + seq.detection_length};
  const Window pulse{"pulse", seq.pulse_time, seq.pulse_time + seq.pulse_length};
  const double eps = 1e-15;

  // Each window against its containers, outermost first; one report per window.
  auto check = [&](const Window& w, std::initializer_list<Window> containers) {
    for (const Window& c : containers) {
      if (w.start >= c.start - eps && w.end <= c.end + eps) continue;
      std::string msg;
      if (&c == containers.begin() && (w.start >= c.end || w.end <= c.start))
        msg = std::string(w.name) + " in dipole-on phase";
      else
        msg = std::string(w.name) + " exceeds " + c.name;
      out.push_back({w.name, c.name, msg});
      return;
    }
  };
  check(det, {off});
  check(aom, {off});
  check(pulse, {off, aom});
  return out;
}

long long pulses_per_phase(const TimingSequence& seq, const PhaseProgram& program) {
  program.validate();
  const auto v = validate_sequence(seq);
  if (!v.empty()) throw DomainError("pulses_per_phase: invalid sequence: " + v.front().message);
  const double ratio = program.generation_duration / seq.chop_period;
  return static_cast<long long>(std::floor(ratio * (1 + 1e-12)));
}

double collection_efficiency(double fiber_rate, double pulse_rate, double p1) {
  if (!(fiber_rate >= 0)) throw DomainError("collection_efficiency: fiber_rate must be >= 0");
  if (!(pulse_rate > 0) || !(p1 > 0))
    throw DomainError("collection_efficiency: pulse_rate and p1 must be > 0");
  return fiber_rate / (pulse_rate * p1);
}

double average_flux(double fiber_rate, const PhaseProgram& program) {
  program.validate();
  if (!(fiber_rate >= 0)) throw DomainError("average_flux: fiber_rate must be >= 0");
  const double p = program.survival_probability;
  const double load = p * program.verify_time + (1 - p) * program.full_reload_time;
  return fiber_rate * program.generation_duration / (program.generation_duration + load);
}

double solve_survival(double fiber_rate, const PhaseProgram& program, double target_flux,
                      double tolerance) {
  PhaseProgram p = program;
  auto flux = [&](double ps) {
    p.survival_probability = ps;
    return average_flux(fiber_rate, p);
  };
  double lo = 0, hi = 1;
  const double f_lo = flux(lo), f_hi = flux(hi);
  if (!(target_flux >= f_lo && target_flux <= f_hi))
    throw DomainError("solve_survival: target flux outside the reachable range");
  if (program.verify_time > program.full_reload_time)
    throw DomainError("solve_survival: flux is not increasing in the survival probability");
  while (hi - lo > tolerance) {
    const double mid = (lo + hi) / 2;
    (flux(mid) < target_flux ? lo : hi) = mid;
  }
  return (lo + hi) / 2;
}

double spectral_brightness(double flux, double natural_linewidth_hz) {
  if (!(natural_linewidth_hz > 0)) throw DomainError("spectral_brightness: linewidth must be > 0");
  if (!(flux >= 0)) throw DomainError("spectral_brightness: flux must be >= 0");
  return flux / (natural_linewidth_hz * 1e-6);
}

BudgetReport budget_report(const TimingSequence& seq, const PhaseProgram& program,
                           double fiber_rate, double p1, double natural_linewidth_hz) {
  BudgetReport r;
  r.pulses_per_phase = pulses_per_phase(seq, program);
  r.pulse_rate = seq.pulse_rate();
  r.fiber_photon_rate = fiber_rate;
  r.collection_efficiency = collection_efficiency(fiber_rate, r.pulse_rate, p1);
  r.survival_probability = program.survival_probability;
  r.average_flux = average_flux(fiber_rate, program);
  r.spectral_brightness = spectral_brightness(r.average_flux, natural_linewidth_hz);
  return r;
}

}  // namespace tweezer
