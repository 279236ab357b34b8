#include "tweezer/chop_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "tweezer/constants.hpp"
#include "tweezer/errors.hpp"
#include "tweezer/parallel.hpp"
#include "tweezer/random.hpp"

namespace tweezer {

void ChopWaveform::validate() const {
  if (!(frequency > 0) || !std::isfinite(frequency))
    throw ConfigError("chop: frequency must be > 0");
  if (!(duty_cycle > 0 && duty_cycle <= 1))
    throw ConfigError("chop: duty_cycle must lie in (0, 1]");
  if (!std::isfinite(phase_offset)) throw ConfigError("chop: phase_offset must be finite");
}

int chop_state(const ChopWaveform& w, double t) {
  if (w.is_static()) return 1;
  const double cycles = (t - w.phase_offset) * w.frequency;
  const double frac = cycles - std::floor(cycles);
  return frac < w.duty_cycle ? 1 : 0;
}

void TrajectoryConfig::validate() const {
  if (!(time_step >= 0)) throw ConfigError("trajectory: time_step must be >= 0");
  if (!(max_time > 0)) throw ConfigError("trajectory: max_time must be > 0");
  if (!(loss_radius_factor >= 3)) throw ConfigError("trajectory: loss_radius_factor must be >= 3");
  if (!(background_gas_rate >= 0)) throw ConfigError("trajectory: background_gas_rate must be >= 0");
  if (!(friction_coefficient >= 0)) throw ConfigError("trajectory: friction_coefficient must be >= 0");
}

double max_time_step(const ChopWaveform& waveform, const AtomSpecies& species,
                     const BeamGeometry& geometry) {
  const double radial = trap_frequencies(species, geometry)[0];
  double dt = 1 / (100 * radial);
  if (!waveform.is_static()) dt = std::min(dt, 1 / (50 * waveform.frequency));
  return dt;
}

std::vector<AtomState> sample_thermal_ensemble(double temperature,
                                               const BeamGeometry& geometry,
                                               const AtomSpecies& species, std::size_t n,
                                               std::uint64_t seed) {
  const double depth = trap_depth(species, geometry);
  if (!(temperature >= 0)) throw DomainError("sample_thermal_ensemble: negative temperature");
  if (!(temperature < depth))
    throw DomainError("sample_thermal_ensemble: temperature must be below the trap depth");
  const auto [fr, fz] = trap_frequencies(species, geometry);
  const double m = species.mass;
  const double sigma_v = std::sqrt(phys::kB * temperature / m);
  const double sigma_r = sigma_v / (2 * phys::pi * fr);
  const double sigma_z = sigma_v / (2 * phys::pi * fz);

  Rng rng = make_rng(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<AtomState> atoms(n);
  for (auto& a : atoms) {
    a.position = {sigma_r * normal(rng), sigma_r * normal(rng), sigma_z * normal(rng)};
    a.velocity = {sigma_v * normal(rng), sigma_v * normal(rng), sigma_v * normal(rng)};
  }
  return atoms;
}

namespace {

double kinetic(const Vec3& v, double m) {
  return 0.5 * m * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

struct Stepper {
  const GaussianTrap& trap;
  double friction;

  /// n velocity-Verlet steps of size h in the full potential.
  void on_phase(Vec3& x, Vec3& v, double length, double dt) const {
    const auto n = static_cast<long>(std::ceil(length / dt - 1e-9));
    if (n <= 0) return;
    const double h = length / static_cast<double>(n);
    const double damp = friction > 0 ? std::exp(-0.5 * friction * h) : 1.0;
    Vec3 a;
    trap.potential_and_acceleration(x, a);
    for (long i = 0; i < n; ++i) {
      for (int k = 0; k < 3; ++k) {
        v[k] = v[k] * damp + 0.5 * h * a[k];
        x[k] += h * v[k];
      }
      trap.potential_and_acceleration(x, a);
      for (int k = 0; k < 3; ++k) v[k] = (v[k] + 0.5 * h * a[k]) * damp;
    }
  }

  void off_phase(Vec3& x, Vec3& v, double length) const {
    if (length <= 0) return;
    const double drift = friction > 0 ? -std::expm1(-friction * length) / friction : length;
    const double decay = friction > 0 ? std::exp(-friction * length) : 1.0;
    for (int k = 0; k < 3; ++k) {
      x[k] += drift * v[k];
      v[k] *= decay;
    }
  }
};

bool outside_loss_region(const Vec3& x, const GaussianTrap& trap, double factor) {
  const double r2 = x[0] * x[0] + x[1] * x[1];
  const double rmax = factor * trap.waist();
  return r2 > rmax * rmax || std::abs(x[2]) > factor * trap.rayleigh();
}

TrajectoryResult integrate_impl(const AtomState& initial, const ChopWaveform& waveform,
                                const GaussianTrap& trap, double dt,
                                const TrajectoryConfig& config) {
  TrajectoryResult result;
  result.time_step = dt;
  result.final_state = initial;
  AtomState& st = result.final_state;
  if (!st.alive) return result;

  double end_time = config.max_time;
  std::optional<double> gas_time;
  if (config.background_gas_rate > 0) {
    Rng rng = make_rng(config.rng_seed, 0);
    const double t = -std::log1p(-uniform01(rng)) / config.background_gas_rate;
    if (t < end_time) {
      gas_time = t;
      end_time = t;
    }
  }

  const Stepper stepper{trap, config.friction_coefficient};
  const double duty = std::min(waveform.duty_cycle, 1.0);
  const double period = waveform.period();
  auto averaged_energy = [&](const Vec3& x, const Vec3& v) {
    return kinetic(v, trap.mass()) + duty * trap.potential(x);
  };

  Vec3& x = st.position;
  Vec3& v = st.velocity;
  if (config.record_history)
    result.history.push_back({0.0, x, v, averaged_energy(x, v)});

  auto k = static_cast<long long>(std::floor(-waveform.phase_offset / period));
  double t = 0;
  while (t < end_time) {
    const double start = waveform.phase_offset + static_cast<double>(k) * period;
    const double on_end = waveform.is_static() ? start + period : start + duty * period;
    const double stop = start + period;

    const double a = std::max(t, start);
    const double b = std::min(end_time, on_end);
    if (b > a) stepper.on_phase(x, v, b - a, dt);
    const double c = std::max(t, on_end);
    const double d = std::min(end_time, stop);
    if (d > c) stepper.off_phase(x, v, d - c);
    t = std::min(end_time, stop);

    if (t >= stop) {
      const double e = averaged_energy(x, v);
      if (config.record_history) result.history.push_back({t, x, v, e});
      if (e > 0 && outside_loss_region(x, trap, config.loss_radius_factor)) {
        st.alive = false;
        st.loss_time = t;
        result.cause = LossCause::escaped;
        return result;
      }
    }
    ++k;
  }
  if (gas_time) {
    st.alive = false;
    st.loss_time = *gas_time;
    result.cause = LossCause::background_gas;
  }
  return result;
}

double resolve_step(const ChopWaveform& waveform, const AtomSpecies& species,
                    const BeamGeometry& geometry, const TrajectoryConfig& config) {
  const double limit = max_time_step(waveform, species, geometry);
  if (config.time_step == 0) return limit;
  if (config.time_step > limit * (1 + 1e-9))
    throw ConfigError("trajectory: time_step exceeds min(1/(50 f_chop), 1/(100 f_radial))");
  return config.time_step;
}

}  // namespace

void check_step_stability(const BeamGeometry& geometry, const AtomSpecies& species,
                          double time_step) {
  const GaussianTrap trap(species, geometry);
  const Stepper stepper{trap, 0.0};
  Vec3 x{trap.waist() / 4, 0, trap.rayleigh() / 4};
  Vec3 v{0, 0, 0};
  const double e0 = trap.potential(x);
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    stepper.on_phase(x, v, 10 * time_step, time_step);
    worst = std::max(worst, std::abs(kinetic(v, trap.mass()) + trap.potential(x) - e0));
  }
  if (worst > 1e-3 * trap.depth())
    throw ConfigError("trajectory: time_step fails the static-trap energy self-test");
}

TrajectoryResult integrate_trajectory(const AtomState& initial, const ChopWaveform& waveform,
                                      const BeamGeometry& geometry, const AtomSpecies& species,
                                      const TrajectoryConfig& config) {
  waveform.validate();
  geometry.validate();
  config.validate();
  const double dt = resolve_step(waveform, species, geometry, config);
  check_step_stability(geometry, species, dt);
  const GaussianTrap trap(species, geometry);
  return integrate_impl(initial, waveform, trap, dt, config);
}

SurvivalCurve survival_curve(const std::vector<AtomState>& ensemble,
                             const ChopWaveform& waveform, const BeamGeometry& geometry,
                             const AtomSpecies& species, const TrajectoryConfig& config,
                             std::size_t n_points, unsigned jobs) {
  if (ensemble.empty()) throw DomainError("survival_curve: empty ensemble");
  if (n_points < 2) throw DomainError("survival_curve: need at least two time points");
  waveform.validate();
  geometry.validate();
  config.validate();
  const double dt = resolve_step(waveform, species, geometry, config);
  check_step_stability(geometry, species, dt);
  const GaussianTrap trap(species, geometry);

  TrajectoryConfig per_atom = config;
  per_atom.background_gas_rate = 0;  // applied analytically below
  per_atom.record_history = false;
  const bool conservative_static = waveform.is_static() && config.friction_coefficient == 0;

  SurvivalCurve curve;
  curve.frequency = waveform.frequency;
  curve.loss_times.resize(ensemble.size());
  parallel_for(ensemble.size(), jobs, [&](std::size_t i) {
    const AtomState& a = ensemble[i];
    if (!a.alive) {
      curve.loss_times[i] = a.loss_time.value_or(0.0);
      return;
    }
    // Bound atoms in a static conservative trap can never escape.
    if (conservative_static &&
        kinetic(a.velocity, trap.mass()) + trap.potential(a.position) < -1e-3 * trap.depth())
      return;
    TrajectoryConfig c = per_atom;
    c.rng_seed = derive_seed(config.rng_seed, i);
    const auto r = integrate_impl(a, waveform, trap, dt, c);
    if (!r.final_state.alive) curve.loss_times[i] = r.final_state.loss_time;
  });

  std::vector<double> losses;
  for (const auto& l : curve.loss_times)
    if (l) losses.push_back(*l);
  std::sort(losses.begin(), losses.end());
  const double n = static_cast<double>(ensemble.size());
  curve.times.resize(n_points);
  curve.fraction.resize(n_points);
  for (std::size_t j = 0; j < n_points; ++j) {
    const double t = config.max_time * static_cast<double>(j) / static_cast<double>(n_points - 1);
    const auto lost = std::upper_bound(losses.begin(), losses.end(), t) - losses.begin();
    curve.times[j] = t;
    curve.fraction[j] =
        (n - static_cast<double>(lost)) / n * std::exp(-config.background_gas_rate * t);
  }
  return curve;
}

ExponentialFit fit_exponential(const std::vector<double>& times,
                               const std::vector<double>& fraction) {
  ExponentialFit fit;
  if (times.size() != fraction.size()) {
    fit.message = "size mismatch";
    return fit;
  }
  std::vector<double> t, y;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (fraction[i] > 0) {
      t.push_back(times[i]);
      y.push_back(std::log(fraction[i]));
    }
  const auto n = static_cast<double>(t.size());
  if (t.size() < 3) {
    fit.message = "fewer than three non-zero survival points";
    return fit;
  }
  const double tm = std::accumulate(t.begin(), t.end(), 0.0) / n;
  const double ym = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sxx += (t[i] - tm) * (t[i] - tm);
    sxy += (t[i] - tm) * (y[i] - ym);
  }
  if (!(sxx > 0)) {
    fit.message = "degenerate time grid";
    return fit;
  }
  const double slope = sxy / sxx;
  const double intercept = ym - slope * tm;
  if (!(slope < 0)) {
    fit.message = "no decay within the simulated window";
    return fit;
  }
  double rss = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = y[i] - (intercept + slope * t[i]);
    rss += r * r;
  }
  const double slope_se = std::sqrt(rss / (n - 2) / sxx);
  fit.lifetime = -1 / slope;
  fit.amplitude = std::exp(intercept);
  fit.lifetime_error = slope_se / (slope * slope);
  fit.ok = true;
  return fit;
}

std::vector<LifetimePoint> lifetime_vs_chop(const std::vector<double>& frequencies,
                                            const std::vector<AtomState>& ensemble,
                                            const ChopWaveform& waveform_template,
                                            const BeamGeometry& geometry,
                                            const AtomSpecies& species,
                                            const TrajectoryConfig& config, unsigned jobs) {
  std::vector<LifetimePoint> points;
  points.reserve(frequencies.size());
  for (const double f : frequencies) {
    ChopWaveform w = waveform_template;
    w.frequency = f;
    LifetimePoint p;
    p.frequency = f;
    const auto curve = survival_curve(ensemble, w, geometry, species, config, 101, jobs);
    p.fit = fit_exponential(curve.times, curve.fraction);
    p.survival_at_end = curve.fraction.back();
    points.push_back(p);
  }
  return points;
}

double secular_frequency(const std::vector<TrajectorySample>& history) {
  const std::size_t n = history.size();
  if (n < 16) throw ComputationError("secular_frequency: trajectory too short");
  const double dt = (history.back().time - history.front().time) / static_cast<double>(n - 1);
  if (!(dt > 0)) throw ComputationError("secular_frequency: non-increasing sample times");

  double mean = 0;
  for (const auto& s : history) mean += s.position[0];
  mean /= static_cast<double>(n);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double hann = 0.5 - 0.5 * std::cos(2 * phys::pi * static_cast<double>(i) /
                                             static_cast<double>(n - 1));
    x[i] = (history[i].position[0] - mean) * hann;
  }
  auto power = [&](double f) {
    std::complex<double> acc = 0;
    const std::complex<double> step = std::polar(1.0, -2 * phys::pi * f * dt);
    std::complex<double> phase = 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += x[i] * phase;
      phase *= step;
    }
    return std::norm(acc);
  };

  const double span = dt * static_cast<double>(n - 1);
  const double nyquist = 0.5 / dt;
  const double df = 0.25 / span;
  std::vector<double> grid_power;
  double best_f = 0, best_p = -1;
  for (double f = 2 / span; f < nyquist; f += df) {
    const double p = power(f);
    grid_power.push_back(p);
    if (p > best_p) {
      best_p = p;
      best_f = f;
    }
  }
  if (grid_power.size() < 8) throw ComputationError("secular_frequency: no spectral range");
  std::vector<double> sorted = grid_power;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  if (!(best_p > 20 * median)) throw ComputationError("secular_frequency: no clear spectral peak");

  // Golden-section refinement of the peak between neighbouring grid points.
  double lo = best_f - df, hi = best_f + df;
  const double g = (std::sqrt(5.0) - 1) / 2;
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double pc = power(c), pd = power(d);
  while (hi - lo > 1e-6 * best_f) {
    if (pc > pd) {
      hi = d;
      d = c;
      pd = pc;
      c = hi - g * (hi - lo);
      pc = power(c);
    } else {
      lo = c;
      c = d;
      pc = pd;
      d = lo + g * (hi - lo);
      pd = power(d);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace tweezer
