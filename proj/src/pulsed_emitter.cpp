#include "tweezer/pulsed_emitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "tweezer/errors.hpp"
#include "tweezer/parallel.hpp"
#include "tweezer/random.hpp"

namespace tweezer {

using cplx = std::complex<double>;
constexpr cplx I{0, 1};

void PulseChain::validate() const {
  if (!(eom_duration > 0)) throw ConfigError("pulse chain: eom_duration must be > 0");
  if (!(eom_rise_time >= 0) || eom_rise_time > eom_duration)
    throw ConfigError("pulse chain: eom_rise_time must be in [0, eom_duration]");
  if (!(aom_window > 0) || !(detection_window >= 0) || !(off_phase > 0))
    throw ConfigError("pulse chain: windows must be positive");
  if (!(aom_extinction_intensity >= 1e6))
    throw ConfigError("pulse chain: aom_extinction_intensity below 1e6 is not modelled");
  if (eom_start() < aom_open_time || eom_end() > aom_close_time())
    throw ConfigError("pulse chain: EOM pulse must lie inside the AOM window");
  if (aom_open_time < 0 || aom_close_time() > off_phase)
    throw ConfigError("pulse chain: AOM window must lie inside the dipole-off phase");
  if (detection_open_time < 0 || detection_close_time() > off_phase)
    throw ConfigError("pulse chain: detection window must lie inside the dipole-off phase");
}

double PulseChain::leakage_amplitude() const {
  if (!(eom_extinction_intensity > 0) || std::isinf(eom_extinction_intensity)) return 0;
  return 1 / std::sqrt(eom_extinction_intensity);
}

PulseChain PulseChain::without_leakage() const {
  PulseChain c = *this;
  c.eom_extinction_intensity = std::numeric_limits<double>::infinity();
  return c;
}

std::vector<double> PulseChain::breakpoints() const {
  const double r = eom_rise_time / 2;
  std::vector<double> b{aom_open_time,
                        aom_close_time(),
                        eom_pulse_time - r,
                        eom_pulse_time + r,
                        eom_pulse_time + eom_duration - r,
                        eom_pulse_time + eom_duration + r,
                        detection_open_time,
                        detection_close_time()};
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  return b;
}

void ExcitationBeam::validate() const {
  if (!(waist > 0)) throw ConfigError("excitation beam: waist must be > 0");
  if (!(peak_power > 0)) throw ConfigError("excitation beam: peak_power must be > 0");
  if (!std::isfinite(detuning)) throw ConfigError("excitation beam: detuning must be finite");
}

double TwoLevelState::positivity_margin() const {
  return ground_population * excited_population - std::norm(coherence);
}

namespace {

// The piece is chosen from `ref`, the formula is evaluated at `t`, so that
// RK stages on a segment end use the segment's own branch.
double eom_shape(const PulseChain& c, double t, double ref) {
  const double t1 = c.eom_pulse_time;
  const double t2 = c.eom_pulse_time + c.eom_duration;
  const double r = c.eom_rise_time;
  if (r <= 0) return (ref >= t1 && ref < t2) ? 1.0 : 0.0;
  if (ref <= t1 - r / 2 || ref >= t2 + r / 2) return 0;
  if (ref < t1 + r / 2) return 0.5 * (1 - std::cos(std::numbers::pi * (t - t1 + r / 2) / r));
  if (ref <= t2 - r / 2) return 1;
  return 0.5 * (1 + std::cos(std::numbers::pi * (t - t2 + r / 2) / r));
}

// Envelope without validation, for inner loops.
struct Envelope {
  const PulseChain& chain;
  double omega_peak;
  double floor;

  Envelope(const PulseChain& c, double omega)
      : chain(c), omega_peak(omega), floor(c.leakage_amplitude()) {}

  double operator()(double t) const { return (*this)(t, t); }
  double operator()(double t, double ref) const {
    if (ref < chain.aom_open_time || ref >= chain.aom_close_time()) return 0;
    return omega_peak * (floor + (1 - floor) * eom_shape(chain, t, ref));
  }
};

std::vector<double> make_grid(double a, double b, double h, std::vector<double> breaks) {
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  std::vector<double> knots;
  for (const double x : breaks)
    if (x >= a && x <= b && (knots.empty() || x > knots.back())) knots.push_back(x);
  std::vector<double> grid{knots.front()};
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double len = knots[k + 1] - knots[k];
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / h - 1e-9)));
    for (std::size_t j = 1; j < n; ++j) grid.push_back(knots[k] + len * static_cast<double>(j) / static_cast<double>(n));
    grid.push_back(knots[k + 1]);
  }
  return grid;
}

struct Rhs {
  const Envelope& env;
  double gamma;
  double detuning;
  bool recycle;

  TwoLevelState operator()(double t, double ref, const TwoLevelState& s) const {
    const double omega = env(t, ref);
    const double drive = omega * s.coherence.imag();
    TwoLevelState d;
    d.excited_population = -drive - gamma * s.excited_population;
    d.ground_population = drive + (recycle ? gamma * s.excited_population : 0.0);
    d.coherence = I * detuning * s.coherence -
                  I * (omega / 2) * (s.ground_population - s.excited_population) -
                  (gamma / 2) * s.coherence;
    return d;
  }
};

TwoLevelState axpy(const TwoLevelState& s, double h, const TwoLevelState& d) {
  return {s.ground_population + h * d.ground_population,
          s.excited_population + h * d.excited_population, s.coherence + h * d.coherence};
}

TwoLevelState rk4(const Rhs& f, double t, const TwoLevelState& s, double h) {
  const double mid = t + h / 2;
  const auto k1 = f(t, mid, s);
  const auto k2 = f(mid, mid, axpy(s, h / 2, k1));
  const auto k3 = f(mid, mid, axpy(s, h / 2, k2));
  const auto k4 = f(t + h, mid, axpy(s, h, k3));
  TwoLevelState out = s;
  out.ground_population += h / 6 * (k1.ground_population + 2 * k2.ground_population +
                                    2 * k3.ground_population + k4.ground_population);
  out.excited_population += h / 6 * (k1.excited_population + 2 * k2.excited_population +
                                     2 * k3.excited_population + k4.excited_population);
  out.coherence += h / 6 * (k1.coherence + 2.0 * k2.coherence + 2.0 * k3.coherence + k4.coherence);
  return out;
}

constexpr double kPositivityTolerance = 1e-6;
constexpr double kTraceTolerance = 1e-9;

std::vector<TwoLevelState> integrate_on_grid(const TwoLevelState& initial,
                                             const std::vector<double>& grid, const Envelope& env,
                                             double gamma, double detuning, bool recycle) {
  const Rhs f{env, gamma, detuning, recycle};
  std::vector<TwoLevelState> out;
  out.reserve(grid.size());
  out.push_back(initial);
  const double trace0 = initial.trace();
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const auto next = rk4(f, grid[i - 1], out.back(), grid[i] - grid[i - 1]);
    // The no-jump state is rank one, so only its populations are checked.
    if ((recycle && next.positivity_margin() < -kPositivityTolerance) ||
        next.excited_population < -kPositivityTolerance ||
        next.ground_population < -kPositivityTolerance)
      throw ComputationError("evolve_obe: positivity lost; reduce the step size");
    if (recycle && std::abs(next.trace() - trace0) > kTraceTolerance)
      throw ComputationError("evolve_obe: trace not preserved; reduce the step size");
    out.push_back(next);
  }
  return out;
}

double max_admissible_step(double omega_peak, double gamma, double detuning) {
  const double rate = std::max({omega_peak, gamma, std::abs(detuning)});
  return rate > 0 ? 1 / (20 * rate) : std::numeric_limits<double>::infinity();
}

void check_rates(double omega_peak, double gamma, double detuning) {
  if (!(omega_peak >= 0) || !std::isfinite(omega_peak))
    throw DomainError("omega_peak must be finite and >= 0");
  if (!(gamma >= 0) || !std::isfinite(gamma)) throw DomainError("gamma must be finite and >= 0");
  if (!std::isfinite(detuning)) throw DomainError("detuning must be finite");
}

}  // namespace

double rabi_envelope(const PulseChain& chain, double omega_peak, double t) {
  chain.validate();
  return Envelope(chain, omega_peak)(t);
}

const TwoLevelState& ObeSolution::at(double t) const {
  const auto it = std::lower_bound(times.begin(), times.end(), t - 1e-18);
  if (it == times.end() || std::abs(*it - t) > 1e-18)
    throw DomainError("ObeSolution::at: time is not a grid point");
  return states[static_cast<std::size_t>(it - times.begin())];
}

double obe_step(double omega_peak, double gamma, double detuning, double safety) {
  const double h = max_admissible_step(omega_peak, gamma, detuning);
  return std::isinf(h) ? 1e-10 : safety * h;
}

ObeSolution evolve_obe(const TwoLevelState& initial, const PulseChain& chain, double omega_peak,
                       double gamma, double detuning, double t_start, double t_end, double step,
                       const std::vector<double>& sample_times) {
  chain.validate();
  check_rates(omega_peak, gamma, detuning);
  if (!(t_end >= t_start)) throw DomainError("evolve_obe: t_end must be >= t_start");
  if (!(step > 0)) throw DomainError("evolve_obe: step must be > 0");
  if (step > max_admissible_step(omega_peak, gamma, detuning) * (1 + 1e-12))
    throw DomainError("evolve_obe: step exceeds 1/(20 max(omega, gamma, |detuning|))");
  if (initial.positivity_margin() < -kPositivityTolerance)
    throw DomainError("evolve_obe: initial state is not positive");
  auto breaks = chain.breakpoints();
  breaks.insert(breaks.end(), sample_times.begin(), sample_times.end());
  ObeSolution sol;
  sol.times = make_grid(t_start, t_end, step, std::move(breaks));
  sol.states = integrate_on_grid(initial, sol.times, Envelope(chain, omega_peak), gamma,
                                 detuning, true);
  return sol;
}

namespace {

double excited_after_pulse(const PulseChain& chain, double omega, double gamma, double detuning,
                           double step) {
  const auto grid = make_grid(chain.aom_open_time, chain.eom_end(), step, chain.breakpoints());
  return integrate_on_grid(TwoLevelState{}, grid, Envelope(chain, omega), gamma, detuning, true)
      .back()
      .excited_population;
}

double envelope_area(const PulseChain& chain, double omega) {
  // Composite Simpson between breakpoints; the envelope is smooth inside each.
  const Envelope env(chain, omega);
  const auto grid = make_grid(chain.aom_open_time, chain.aom_close_time(), 1e-12, chain.breakpoints());
  double area = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double a = grid[i - 1], b = grid[i];
    const double eps = 1e-6 * (b - a);
    area += (b - a) / 6 * (env(a + eps) + 4 * env((a + b) / 2) + env(b - eps));
  }
  return area;
}

}  // namespace

PiPulseCalibration calibrate_pi_pulse(const PulseChain& chain, double gamma, double detuning,
                                      double relative_tolerance) {
  chain.validate();
  check_rates(0, gamma, detuning);
  if (!(relative_tolerance > 0)) throw DomainError("calibrate_pi_pulse: tolerance must be > 0");
  const double nominal = std::numbers::pi / chain.eom_duration;
  const double lo = 0.4 * nominal, hi = 1.6 * nominal;
  const double step = obe_step(hi, gamma, detuning);
  auto response = [&](double omega) { return excited_after_pulse(chain, omega, gamma, detuning, step); };

  constexpr int kScan = 25;
  std::vector<double> xs(kScan), ys(kScan);
  for (int i = 0; i < kScan; ++i) {
    xs[i] = lo + (hi - lo) * i / (kScan - 1);
    ys[i] = response(xs[i]);
  }
  int turns = 0;
  for (int i = 1; i + 1 < kScan; ++i)
    if ((ys[i] - ys[i - 1]) * (ys[i + 1] - ys[i]) < 0) ++turns;
  const auto best = static_cast<int>(std::max_element(ys.begin(), ys.end()) - ys.begin());
  if (turns != 1 || best == 0 || best == kScan - 1)
    throw ComputationError("calibrate_pi_pulse: excited population is not unimodal over the bracket");

  const double phi = (std::sqrt(5.0) - 1) / 2;
  double a = xs[best - 1], b = xs[best + 1];
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = response(c), fd = response(d);
  while (b - a > relative_tolerance * nominal) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = response(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = response(d);
    }
  }
  PiPulseCalibration cal;
  cal.omega_peak = (a + b) / 2;
  cal.excited_population = response(cal.omega_peak);
  cal.pulse_area = envelope_area(chain, cal.omega_peak);
  return cal;
}

namespace {

struct WindowEvolution {
  std::vector<double> times;
  std::vector<TwoLevelState> no_jump;
  TwoLevelState at_open;
};

WindowEvolution evolve_window(const PulseChain& chain, double omega, double gamma, double detuning,
                              double step) {
  const Envelope env(chain, omega);
  const double t0 = std::min(chain.aom_open_time, chain.detection_open_time);
  const double d0 = chain.detection_open_time, d1 = chain.detection_close_time();
  WindowEvolution w;
  if (d0 > t0) {
    const auto pre = make_grid(t0, d0, step, chain.breakpoints());
    w.at_open = integrate_on_grid(TwoLevelState{}, pre, env, gamma, detuning, true).back();
  }
  w.times = make_grid(d0, d1, step, chain.breakpoints());
  w.no_jump = integrate_on_grid(w.at_open, w.times, env, gamma, detuning, false);
  return w;
}

}  // namespace

double single_photon_window_probability(const PulseChain& chain, double omega_peak, double gamma,
                                        double detuning) {
  chain.validate();
  check_rates(omega_peak, gamma, detuning);
  if (chain.detection_window <= 0) return 0;
  const auto w = evolve_window(chain, omega_peak, gamma, detuning, obe_step(omega_peak, gamma, detuning));
  return std::clamp(1 - w.no_jump.back().trace(), 0.0, 1.0);
}

EmissionTimeDistribution emission_time_distribution(const PulseChain& chain, double omega_peak,
                                                    double gamma, double detuning, double step) {
  chain.validate();
  check_rates(omega_peak, gamma, detuning);
  if (!(step > 0)) throw DomainError("emission_time_distribution: step must be > 0");
  step = std::min(step, obe_step(omega_peak, gamma, detuning));
  const auto w = evolve_window(chain, omega_peak, gamma, detuning, step);
  const auto full = integrate_on_grid(w.at_open, w.times, Envelope(chain, omega_peak), gamma,
                                      detuning, true);
  EmissionTimeDistribution out;
  out.times = w.times;
  out.first_photon_density.reserve(w.times.size());
  out.emission_rate.reserve(w.times.size());
  for (std::size_t i = 0; i < w.times.size(); ++i) {
    out.first_photon_density.push_back(gamma * w.no_jump[i].excited_population);
    out.emission_rate.push_back(gamma * full[i].excited_population);
  }
  out.window_probability = std::clamp(1 - w.no_jump.back().trace(), 0.0, 1.0);
  return out;
}

namespace {

struct Wave {
  cplx g{1, 0};
  cplx e{0, 0};
  double norm() const { return std::norm(g) + std::norm(e); }
};

struct BlockTally {
  std::uint64_t n[3] = {0, 0, 0};
  double first_time_sum = 0;
  std::uint64_t first_count = 0;
  std::vector<double> first_times;
  std::vector<double> single_times;
  std::vector<std::array<double, 2>> pair_times;
  std::vector<double> cp_sum, cp_sq;
};

class Trajectory {
 public:
  Trajectory(const PulseChain& chain, double omega, double gamma, double detuning, double step)
      : env_(chain, omega), gamma_(gamma), detuning_(detuning), step_(step),
        d0_(chain.detection_open_time), d1_(chain.detection_close_time()) {}

  // Advances through [a, b]; `driven` selects RK4 versus the exact free decay.
  void advance(double a, double b, bool driven, Rng& rng) {
    if (driven) {
      double t = a;
      while (t < b) {
        const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((b - t) / step_ - 1e-9)));
        const double h = (b - t) / static_cast<double>(n);
        bool jumped = false;
        for (std::size_t k = 0; k < n; ++k) {
          const double t0 = t;
          const double t1 = (k + 1 == n) ? b : t + h;
          const double before = psi_.norm();
          const Wave next = rk4(t0, t1 - t0);
          const double after = next.norm();
          if (after < threshold_) {
            const double frac = (before - threshold_) / (before - after);
            jump(t0 + frac * (t1 - t0), rng);
            t = t0 + frac * (t1 - t0);
            jumped = true;
            break;
          }
          psi_ = next;
          t = t1;
        }
        if (!jumped) break;
      }
    } else {
      const double pg = std::norm(psi_.g), pe = std::norm(psi_.e);
      if (pe > 0 && gamma_ > 0 && threshold_ > pg) {
        const double tj = a + std::log(pe / (threshold_ - pg)) / gamma_;
        if (tj < b) {
          jump(tj, rng);
          return;  // ground state stays put without drive
        }
      }
      psi_.e *= std::exp(cplx(-gamma_ / 2, detuning_) * (b - a));
    }
  }

  void reset(Rng& rng) {
    psi_ = Wave{};
    threshold_ = uniform01(rng);
    emissions_ = 0;
    first_ = -1;
    second_ = -1;
  }

  double excited() const { return std::norm(psi_.e) / psi_.norm(); }
  int emissions() const { return emissions_; }
  double first_emission() const { return first_; }
  double second_emission() const { return second_; }

 private:
  Wave rhs(double t, double ref, const Wave& w) const {
    const double omega = env_(t, ref);
    return {-I * (omega / 2) * w.e, cplx(-gamma_ / 2, detuning_) * w.e - I * (omega / 2) * w.g};
  }

  Wave rk4(double t, double h) const {
    const Wave& s = psi_;
    const double mid = t + h / 2;
    const Wave k1 = rhs(t, mid, s);
    const Wave k2 = rhs(mid, mid, {s.g + h / 2 * k1.g, s.e + h / 2 * k1.e});
    const Wave k3 = rhs(mid, mid, {s.g + h / 2 * k2.g, s.e + h / 2 * k2.e});
    const Wave k4 = rhs(t + h, mid, {s.g + h * k3.g, s.e + h * k3.e});
    return {s.g + h / 6 * (k1.g + 2.0 * k2.g + 2.0 * k3.g + k4.g),
            s.e + h / 6 * (k1.e + 2.0 * k2.e + 2.0 * k3.e + k4.e)};
  }

  void jump(double t, Rng& rng) {
    if (t >= d0_ && t < d1_) {
      if (emissions_ == 0) first_ = t;
      if (emissions_ == 1) second_ = t;
      ++emissions_;
    }
    psi_ = Wave{};
    threshold_ = uniform01(rng);
  }

  Envelope env_;
  double gamma_, detuning_, step_, d0_, d1_;
  Wave psi_;
  double threshold_ = 0;
  int emissions_ = 0;
  double first_ = -1;
  double second_ = -1;
};

}  // namespace

EmissionStatistics jump_monte_carlo(const PulseChain& chain, double omega_peak, double gamma,
                                    double detuning, std::size_t n_traj, std::uint64_t seed,
                                    const JumpOptions& options) {
  chain.validate();
  check_rates(omega_peak, gamma, detuning);
  if (n_traj == 0) throw DomainError("jump_monte_carlo: n_traj must be >= 1");
  const double step = options.step > 0 ? options.step : obe_step(omega_peak, gamma, detuning);
  if (step > max_admissible_step(omega_peak, gamma, detuning) * (1 + 1e-12))
    throw DomainError("jump_monte_carlo: step exceeds min(1/(20 omega), 1/(20 gamma))");

  const double t_begin = std::min(chain.aom_open_time, chain.detection_open_time);
  double t_end = chain.detection_close_time();
  for (const double c : options.checkpoints) t_end = std::max(t_end, c);
  auto breaks = chain.breakpoints();
  for (const double c : options.checkpoints)
    if (c > t_begin) breaks.push_back(c);
  breaks.push_back(t_begin);
  breaks.push_back(t_end);
  std::sort(breaks.begin(), breaks.end());
  std::vector<double> knots;
  for (const double x : breaks)
    if (x >= t_begin && x <= t_end && (knots.empty() || x > knots.back())) knots.push_back(x);

  const Envelope env(chain, omega_peak);
  std::vector<char> driven(knots.size(), 0);
  for (std::size_t k = 0; k + 1 < knots.size(); ++k)
    driven[k] = env((knots[k] + knots[k + 1]) / 2) > 0;

  // Checkpoint i is read when the trajectory reaches knot cp_knot[i].
  const std::size_t n_cp = options.checkpoints.size();
  std::vector<std::ptrdiff_t> cp_knot(n_cp, -1);
  for (std::size_t i = 0; i < n_cp; ++i) {
    const double c = options.checkpoints[i];
    if (c > t_begin)
      cp_knot[i] = std::lower_bound(knots.begin(), knots.end(), c) - knots.begin();
  }

  constexpr std::size_t kBlock = 256;
  const std::size_t n_blocks = (n_traj + kBlock - 1) / kBlock;
  std::vector<BlockTally> tallies(n_blocks);
  parallel_for(n_blocks, options.jobs, [&](std::size_t blk) {
    BlockTally& tally = tallies[blk];
    tally.cp_sum.assign(n_cp, 0.0);
    tally.cp_sq.assign(n_cp, 0.0);
    Rng rng = make_rng(seed, blk);
    Trajectory traj(chain, omega_peak, gamma, detuning, step);
    std::vector<double> at_knot(knots.size());
    const std::size_t first = blk * kBlock, last = std::min(n_traj, first + kBlock);
    for (std::size_t i = first; i < last; ++i) {
      traj.reset(rng);
      at_knot[0] = traj.excited();
      for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        traj.advance(knots[k], knots[k + 1], driven[k] != 0, rng);
        at_knot[k + 1] = traj.excited();
      }
      ++tally.n[std::min(traj.emissions(), 2)];
      if (traj.emissions() > 0) {
        tally.first_time_sum += traj.first_emission();
        ++tally.first_count;
        tally.first_times.push_back(traj.first_emission());
        if (traj.emissions() == 1)
          tally.single_times.push_back(traj.first_emission());
        else
          tally.pair_times.push_back({traj.first_emission(), traj.second_emission()});
      }
      for (std::size_t c = 0; c < n_cp; ++c) {
        const double v = cp_knot[c] < 0 ? 0.0 : at_knot[static_cast<std::size_t>(cp_knot[c])];
        tally.cp_sum[c] += v;
        tally.cp_sq[c] += v * v;
      }
    }
  });

  EmissionStatistics stats;
  stats.trajectories = n_traj;
  std::uint64_t counts[3] = {0, 0, 0};
  double first_sum = 0;
  std::uint64_t first_count = 0;
  std::vector<double> cp_sum(n_cp, 0.0), cp_sq(n_cp, 0.0);
  for (const auto& t : tallies) {
    for (int k = 0; k < 3; ++k) counts[k] += t.n[k];
    first_sum += t.first_time_sum;
    first_count += t.first_count;
    for (const double x : t.first_times)
      if (stats.jump_times.size() < options.max_jump_samples) stats.jump_times.push_back(x);
    for (const double x : t.single_times)
      if (stats.single_times.size() < options.max_jump_samples) stats.single_times.push_back(x);
    for (const auto& x : t.pair_times)
      if (stats.pair_times.size() < options.max_jump_samples) stats.pair_times.push_back(x);
    for (std::size_t c = 0; c < n_cp; ++c) {
      cp_sum[c] += t.cp_sum[c];
      cp_sq[c] += t.cp_sq[c];
    }
  }
  const auto N = static_cast<double>(n_traj);
  stats.p0 = static_cast<double>(counts[0]) / N;
  stats.p1 = static_cast<double>(counts[1]) / N;
  stats.p2plus = static_cast<double>(counts[2]) / N;
  stats.p2plus_error = std::sqrt(stats.p2plus * (1 - stats.p2plus) / N);
  stats.mean_emission_time = first_count > 0 ? first_sum / static_cast<double>(first_count) : 0;
  stats.checkpoint_times = options.checkpoints;
  for (std::size_t c = 0; c < n_cp; ++c) {
    const double mean = cp_sum[c] / N;
    const double var = std::max(cp_sq[c] / N - mean * mean, 0.0);
    stats.checkpoint_excited.push_back(mean);
    stats.checkpoint_error.push_back(std::sqrt(var / std::max(N - 1, 1.0)));
  }
  return stats;
}

DurationVerdict pulse_duration_constraints(double tau, double gamma, double hyperfine_splitting,
                                           double margin_low, double margin_high) {
  if (!(tau > 0) || !(gamma > 0) || !(hyperfine_splitting > 0) || !(margin_low > 0) ||
      !(margin_high > 0))
    throw DomainError("pulse_duration_constraints: inputs must be positive");
  if (tau < margin_low / (2 * hyperfine_splitting)) return DurationVerdict::too_short;
  if (tau > margin_high / gamma) return DurationVerdict::too_long;
  return DurationVerdict::ok;
}

const char* to_string(DurationVerdict verdict) {
  switch (verdict) {
    case DurationVerdict::ok: return "ok";
    case DurationVerdict::too_long: return "too_long";
    case DurationVerdict::too_short: return "too_short";
  }
  return "unknown";
}

}  // namespace tweezer
