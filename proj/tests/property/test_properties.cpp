#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "tweezer/chop_dynamics.hpp"
#include "tweezer/errors.hpp"
#include "tweezer/photon_stream.hpp"
#include "tweezer/pulsed_emitter.hpp"
#include "tweezer/sequence_budget.hpp"
#include "tweezer/telegraph.hpp"
#include "tweezer/trap_model.hpp"
#include "tweezer/units.hpp"

using namespace tweezer;

namespace {

constexpr double kPi = 3.14159265358979323846;
const double kGamma = 2 * kPi * 6.0666e6;

struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }
  double log_uniform(double a, double b) { return std::exp(uniform(std::log(a), std::log(b))); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); }
  bool coin() { return integer(0, 1) == 1; }
  BeamGeometry beam() {
    return {uniform(0.8e-6, 3e-6), uniform(800e-9, 1100e-9), log_uniform(1e-4, 0.1), uniform(-1e-6, 1e-6)};
  }
};

EmissionStatistics synthetic_stats(double p1, double p2, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> decay(1 / 26e-9);
  EmissionStatistics s;
  s.p1 = p1;
  s.p2plus = p2;
  s.p0 = 1 - p1 - p2;
  for (int i = 0; i < 5000; ++i) {
    s.single_times.push_back(std::min(48e-9 + decay(rng), 224e-9));
    s.pair_times.push_back({47e-9, std::min(48e-9 + decay(rng), 224e-9)});
  }
  return s;
}

std::array<DetectorModel, 2> dark_free() {
  DetectorModel d;
  d.dark_rate = 0;
  return {d, d};
}

TimestampStream random_stream(Gen& g, std::size_t n, std::int64_t span) {
  TimestampStream s;
  std::vector<std::int64_t> t(n);
  for (auto& x : t) x = static_cast<std::int64_t>(g.uniform(0, static_cast<double>(span)));
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  s.times_ps = t;
  return s;
}

}  // namespace

TEST_SUITE("trap") {
  TEST_CASE("potential is attractive and vanishes far away") {
    Gen g(1);
    const auto rb = AtomSpecies::rubidium87();
    for (int i = 0; i < 500; ++i) {
      const auto beam = g.beam();
      const double r = g.uniform(0, 5 * beam.waist_w0), z = g.uniform(-30e-6, 30e-6);
      CHECK(dipole_potential(rb, beam, r, z) <= 0.0);
      CHECK(dipole_potential(rb, beam, r, z) >= dipole_potential(rb, beam, 0, beam.focus_position));
      const double far = dipole_potential(rb, beam, 10 * beam_radius(beam, z - beam.focus_position), z);
      CHECK(std::abs(far) < 1e-12 * std::abs(dipole_potential(rb, beam, 0, beam.focus_position)));
    }
  }

  TEST_CASE("potential is linear in power") {
    Gen g(2);
    const auto rb = AtomSpecies::rubidium87();
    for (int i = 0; i < 300; ++i) {
      const auto beam = g.beam();
      const double k = g.uniform(0.1, 10);
      const double r = g.uniform(0, 2 * beam.waist_w0), z = g.uniform(-10e-6, 10e-6);
      CHECK(dipole_potential(rb, beam.with_power(k * beam.power), r, z) ==
            doctest::Approx(k * dipole_potential(rb, beam, r, z)).epsilon(1e-12));
      const auto f1 = trap_frequencies(rb, beam);
      const auto f4 = trap_frequencies(rb, beam.with_power(4 * beam.power));
      CHECK(f4[0] == doctest::Approx(2 * f1[0]).epsilon(1e-12));
      CHECK(f4[1] == doctest::Approx(2 * f1[1]).epsilon(1e-12));
    }
  }
}

TEST_SUITE("dynamics") {
  TEST_CASE("static trap conserves energy over 1e5 steps") {
    Gen g(3);
    const auto rb = AtomSpecies::rubidium87();
    const BeamGeometry beam{1.4e-6, 810e-9, 13.8e-3, 0};
    for (int i = 0; i < 5; ++i) {
      AtomState a;
      a.position = {g.uniform(-0.3e-6, 0.3e-6), g.uniform(-0.3e-6, 0.3e-6), g.uniform(-1e-6, 1e-6)};
      a.velocity = {g.uniform(-0.05, 0.05), g.uniform(-0.05, 0.05), g.uniform(-0.05, 0.05)};
      TrajectoryConfig c;
      c.time_step = 1e-9;
      c.max_time = 1e-4;
      c.record_history = true;
      const auto r = integrate_trajectory(a, ChopWaveform{1e7, 1.0, 0}, beam, rb, c);
      const double e0 = r.history.front().energy;
      double worst = 0;
      for (const auto& s : r.history) worst = std::max(worst, std::abs(s.energy - e0));
      CHECK(worst / std::abs(e0) < 1e-6);
    }
  }

  TEST_CASE("fast chopping gives the sqrt(duty) secular frequency") {
    Gen g(4);
    const auto rb = AtomSpecies::rubidium87();
    const BeamGeometry beam{1.4e-6, 810e-9, 13.8e-3, 0};
    const double f_static = trap_frequencies(rb, beam)[0];
    for (int i = 0; i < 4; ++i) {
      const double duty = g.uniform(0.25, 0.9);
      const double f_chop = g.uniform(10, 30) * f_static;
      AtomState a;
      a.position = {g.uniform(0.02, 0.08) * 1.4e-6, 0, 0};
      TrajectoryConfig c;
      c.max_time = 2e-3;
      c.record_history = true;
      const auto r = integrate_trajectory(a, ChopWaveform{f_chop, duty, 0}, beam, rb, c);
      CHECK(secular_frequency(r.history) == doctest::Approx(std::sqrt(duty) * f_static).epsilon(0.03));
    }
  }

  TEST_CASE("survival does not decrease with chop frequency") {
    const auto rb = AtomSpecies::rubidium87();
    const BeamGeometry beam{1.4e-6, 810e-9, 13.8e-3, 0};
    const std::size_t n = 500;
    const auto atoms = sample_thermal_ensemble(300e-6, beam, rb, n, 5);
    TrajectoryConfig c;
    c.max_time = 2e-3;
    std::vector<double> s;
    for (const double f : {0.3e6, 0.6e6, 1e6, 2e6, 4e6})
      s.push_back(survival_curve(atoms, ChopWaveform{f, 0.5, 0}, beam, rb, c, 2).fraction.back());
    for (std::size_t i = 1; i < s.size(); ++i) {
      const double se = std::sqrt((s[i] * (1 - s[i]) + s[i - 1] * (1 - s[i - 1])) / n);
      CHECK(s[i] - s[i - 1] >= -1.645 * se);
    }
    CHECK(s.back() > s.front());
  }

  TEST_CASE("identical seeds give bit-identical results") {
    const auto rb = AtomSpecies::rubidium87();
    const BeamGeometry beam{1.4e-6, 810e-9, 13.8e-3, 0};
    Gen g(6);
    for (int i = 0; i < 3; ++i) {
      const auto seed = static_cast<std::uint64_t>(g.integer(1, 1000000));
      const auto a = sample_thermal_ensemble(500e-6, beam, rb, 40, seed);
      const auto b = sample_thermal_ensemble(500e-6, beam, rb, 40, seed);
      TrajectoryConfig c;
      c.max_time = 1e-3;
      c.record_history = true;
      c.rng_seed = seed;
      c.background_gas_rate = 500;
      const ChopWaveform w{g.uniform(2e5, 2e6), 0.5, 0};
      for (std::size_t k = 0; k < a.size(); k += 7) {
        const auto ra = integrate_trajectory(a[k], w, beam, rb, c);
        const auto rb2 = integrate_trajectory(b[k], w, beam, rb, c);
        REQUIRE(ra.history.size() == rb2.history.size());
        for (std::size_t j = 0; j < ra.history.size(); ++j) {
          CHECK(ra.history[j].position == rb2.history[j].position);
          CHECK(ra.history[j].velocity == rb2.history[j].velocity);
        }
        CHECK(ra.final_state.loss_time == rb2.final_state.loss_time);
      }
      c.record_history = false;
      CHECK(survival_curve(a, w, beam, rb, c, 5, 1).loss_times ==
            survival_curve(b, w, beam, rb, c, 5, 4).loss_times);
    }
  }
}

TEST_SUITE("telegraph") {
  TEST_CASE("fit recovers its own model in most trials") {
    Gen g(7);
    int inside = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
      const double w1 = g.uniform(0.2, 0.5);
      const double b = g.uniform(1500, 2500), s = g.uniform(4000, 7000), T = 10e-3;
      std::discrete_distribution<int> pick({1 - w1, w1});
      CountHistogram h;
      for (int i = 0; i < 20000; ++i) {
        const int k = pick(g.rng);
        const auto n = static_cast<std::size_t>(std::poisson_distribution<int>((b + k * s) * T)(g.rng));
        if (h.size() <= n) h.resize(n + 1);
        ++h[n];
      }
      const auto fit = fit_compound_poisson(h, 1, T);
      const auto& m = fit.model;
      const bool ok = std::abs(m.weights[1] - w1) < 3 * fit.weight_errors[1] &&
                      std::abs(m.background_rate - b) < 3 * fit.background_rate_error &&
                      std::abs(m.single_atom_rate - s) < 3 * fit.single_atom_rate_error;
      inside += ok ? 1 : 0;
    }
    CHECK(inside >= 95);
  }

  TEST_CASE("two-atom weight shrinks with sample size under blockade") {
    double previous = 1;
    for (const double duration : {100.0, 400.0, 1600.0}) {
      const auto path = simulate_occupancy({1.0, 2.5, true}, duration, 8);
      const auto trace = trace_from_occupancy(path, 2100, 5900, 10e-3, 9);
      const auto fit = fit_compound_poisson(histogram_of(trace), 2, 10e-3);
      CHECK(fit.model.weights[2] < 0.01);
      CHECK(fit.model.weights[2] <= std::max(previous, 1e-6));
      previous = fit.model.weights[2];
    }
  }

  TEST_CASE("histogram follows the occupancy-weighted mixture") {
    // A fixed occupancy pattern aligned with the bins gives exact weights.
    OccupancyPath path;
    Gen g(10);
    const double T = 10e-3;
    const int bins = 50000;
    int occupied = 0;
    for (int i = 0; i < bins; ++i) {
      const int level = g.uniform(0, 1) < 0.3 ? 1 : 0;
      occupied += level;
      if (path.levels.empty() || path.levels.back() != level) {
        path.times.push_back(i * T);
        path.levels.push_back(level);
      }
    }
    path.duration = bins * T;
    const auto trace = trace_from_occupancy(path, 2100, 5900, T, 11);
    const auto h = histogram_of(trace);
    CompoundPoissonModel m;
    m.weights = {1 - occupied / double(bins), occupied / double(bins)};
    m.background_rate = 2100;
    m.single_atom_rate = 5900;
    m.bin_width = T;
    // Pool tail cells so every expected count is at least 5.
    double chi2 = 0, e_acc = 0, o_acc = 0;
    int cells = 0;
    for (std::size_t n = 0; n < h.size() + 50; ++n) {
      e_acc += bins * m.pmf(static_cast<std::int64_t>(n));
      o_acc += n < h.size() ? static_cast<double>(h[n]) : 0.0;
      if (e_acc >= 5) {
        chi2 += (o_acc - e_acc) * (o_acc - e_acc) / e_acc;
        ++cells;
        e_acc = o_acc = 0;
      }
    }
    const boost::math::chi_squared_distribution<double> dist(cells - 1);
    CHECK(chi2 < boost::math::quantile(dist, 0.99));
  }

  TEST_CASE("loading detection on empty traces stays below the analytic rate") {
    const auto th = atom_threshold(2100, 5900, 10e-3);
    const double pfa = boost::math::cdf(boost::math::complement(
        boost::math::poisson_distribution<double>(21.0), static_cast<double>(th.threshold)));
    const auto empty = simulate_occupancy({0.0, 2.5, true}, 20000, 12);
    const auto trace = trace_from_occupancy(empty, 2100, 5900, 10e-3, 13);
    const auto d = detect_loading(trace, th.threshold);
    const double pairs = static_cast<double>(trace.counts.size() - 1);
    // Expected false alarms are pairs * pfa^2; allow a 3 sigma Poisson margin.
    const double bound = pairs * pfa * pfa;
    CHECK(static_cast<double>(d.size()) <= bound + 3 * std::sqrt(bound) + 1);
  }
}

TEST_SUITE("emitter") {
  TEST_CASE("OBE keeps the density matrix positive") {
    Gen g(14);
    for (int i = 0; i < 40; ++i) {
      PulseChain chain;
      chain.eom_rise_time = g.uniform(0, 1.5e-9);
      chain.eom_extinction_intensity = g.coin() ? g.log_uniform(10, 1e4) : 0;
      const double omega = g.log_uniform(1e7, 3e9);
      const double gamma = g.coin() ? g.log_uniform(1e6, 1e8) : 0;
      const double det = g.uniform(-5e8, 5e8);
      const auto sol = evolve_obe(TwoLevelState{}, chain, omega, gamma, det, 0, 240e-9,
                                  obe_step(omega, gamma, det));
      for (const auto& s : sol.states) {
        CHECK(s.positivity_margin() >= -1e-6);
        CHECK(s.excited_population >= -1e-9);
        CHECK(std::abs(s.coherence) <= 0.5 + 1e-6);
        CHECK(s.trace() == doctest::Approx(1.0).epsilon(1e-9));
      }
      // The residual is truncation error: an eighth of the step leaves 1e-9.
      const auto fine = evolve_obe(TwoLevelState{}, chain, omega, gamma, det, 0, 240e-9,
                                   obe_step(omega, gamma, det, 0.0625));
      for (const auto& s : fine.states) CHECK(s.positivity_margin() >= -1e-9);
    }
  }

  TEST_CASE("quantum jumps reproduce the master equation") {
    const PulseChain chain;
    const auto cal = calibrate_pi_pulse(chain, kGamma);
    JumpOptions opt;
    for (int k = 0; k < 20; ++k) opt.checkpoints.push_back(30e-9 + k * 10e-9);
    const auto mc = jump_monte_carlo(chain, cal.omega_peak, kGamma, 0, 20000, 15, opt);
    const auto obe = evolve_obe(TwoLevelState{}, chain, cal.omega_peak, kGamma, 0, 0, 225e-9,
                                obe_step(cal.omega_peak, kGamma), opt.checkpoints);
    REQUIRE(mc.checkpoint_times.size() == 20);
    int outside = 0;
    for (std::size_t k = 0; k < 20; ++k) {
      const double exact = obe.at(mc.checkpoint_times[k]).excited_population;
      const double err = std::max(mc.checkpoint_error[k], 1e-4);
      if (std::abs(mc.checkpoint_excited[k] - exact) > 3 * err) ++outside;
    }
    CHECK(outside == 0);
  }

  TEST_CASE("reported error matches the spread across seeds") {
    const PulseChain chain;
    const auto cal = calibrate_pi_pulse(chain, kGamma);
    std::vector<double> p2;
    double reported = 0;
    for (std::uint64_t s = 0; s < 30; ++s) {
      const auto r = jump_monte_carlo(chain, cal.omega_peak, kGamma, 0, 4000, 100 + s);
      p2.push_back(r.p2plus);
      reported += r.p2plus_error / 30;
      CHECK(r.p0 + r.p1 + r.p2plus == doctest::Approx(1.0).epsilon(1e-12));
    }
    const double mean = std::accumulate(p2.begin(), p2.end(), 0.0) / 30;
    double var = 0;
    for (const double x : p2) var += (x - mean) * (x - mean) / 29;
    // Sample sd of 30 draws is within about 40% of the truth at 99%.
    CHECK(std::sqrt(var) == doctest::Approx(reported).epsilon(0.4));
    const auto big = jump_monte_carlo(chain, cal.omega_peak, kGamma, 0, 16000, 200);
    CHECK(big.p2plus_error == doctest::Approx(reported / 2).epsilon(0.25));
  }

  TEST_CASE("jump statistics do not depend on the thread count") {
    const PulseChain chain;
    const auto cal = calibrate_pi_pulse(chain, kGamma);
    JumpOptions one, four;
    four.jobs = 4;
    const auto a = jump_monte_carlo(chain, cal.omega_peak, kGamma, 0, 3000, 7, one);
    const auto b = jump_monte_carlo(chain, cal.omega_peak, kGamma, 0, 3000, 7, four);
    CHECK(a.p2plus == b.p2plus);
    CHECK(a.jump_times == b.jump_times);
  }
}

TEST_SUITE("stream") {
  TEST_CASE("correlator equals brute force on random streams") {
    Gen g(16);
    for (int i = 0; i < 30; ++i) {
      const auto span = static_cast<std::int64_t>(g.log_uniform(1e6, 1e9));
      const auto a = random_stream(g, static_cast<std::size_t>(g.integer(1, 1000)), span);
      auto b = random_stream(g, static_cast<std::size_t>(g.integer(1, 1000)), span);
      const double w = g.log_uniform(1e-10, 2e-8);
      const double range = g.uniform(10, 50) * w;
      CHECK(cross_correlate(a, b, w, range).counts == cross_correlate_brute_force(a, b, w, range).counts);
    }
  }

  TEST_CASE("Poisson inputs give unit peak ratios") {
    Gen g(17);
    for (int i = 0; i < 3; ++i) {
      const double T = 0.2;
      const auto a = random_stream(g, 20000, static_cast<std::int64_t>(T * 1e12));
      const auto b = random_stream(g, 20000, static_cast<std::int64_t>(T * 1e12));
      const auto areas = peak_areas(cross_correlate(a, b));
      double mean = 0;
      for (const auto& [k, v] : areas) mean += v / areas.size();
      for (const auto& [k, v] : areas) CHECK(std::abs(v / mean - 1) < 3 * std::sqrt(mean) / mean + 1e-3);
    }
  }

  TEST_CASE("P2 is unchanged by relabeling and global shifts") {
    const auto stats = synthetic_stats(0.96, 0.04, 18);
    const auto s = generate_streams(stats, StreamTiming{}, 1000000, 0.3, dark_free(), 0.5, 19);
    const auto base = two_photon_probability(cross_correlate(s[0], s[1]));
    const auto swapped = two_photon_probability(cross_correlate(s[1], s[0]));
    CHECK(swapped.value == doctest::Approx(base.value).epsilon(1e-12));
    auto a = s[0], b = s[1];
    for (auto& t : a.times_ps) t += 123456789;
    for (auto& t : b.times_ps) t += 123456789;
    CHECK(two_photon_probability(cross_correlate(a, b)).value == base.value);
  }

  TEST_CASE("P2 estimate is unbiased across repetitions") {
    const double p1 = 0.97, p2 = 0.03;
    const auto stats = synthetic_stats(p1, p2, 20);
    const double mean_n = p1 + 2 * p2;
    const double oracle = p2 / (mean_n * mean_n);  // half of E[n(n-1)] / E[n]^2
    // 20 batches of 50 repetitions. A 2 sigma band holds for about 95% of
    // unbiased batches, so at least 16 of 20 must pass.
    const int batches = 20, reps = 50;
    int inside = 0;
    double pooled = 0, pooled_var = 0;
    for (int b = 0; b < batches; ++b) {
      std::vector<double> est;
      for (int r = 0; r < reps; ++r) {
        const auto s = generate_streams(stats, StreamTiming{}, 200000, 0.3, dark_free(), 0.5,
                                        1000 + static_cast<std::uint64_t>(b * reps + r));
        est.push_back(two_photon_probability(cross_correlate(s[0], s[1])).value);
      }
      const double mean = std::accumulate(est.begin(), est.end(), 0.0) / reps;
      double var = 0;
      for (const double x : est) var += (x - mean) * (x - mean) / (reps - 1);
      if (std::abs(mean - oracle) < 2 * std::sqrt(var / reps)) ++inside;
      pooled += mean / batches;
      pooled_var += var / (batches * reps) / batches;
    }
    CHECK(inside >= 16);
    CHECK(std::abs(pooled - oracle) < 3 * std::sqrt(pooled_var));
  }

  TEST_CASE("stream generation is deterministic and thread-independent") {
    const auto stats = synthetic_stats(0.96, 0.04, 21);
    const std::array<DetectorModel, 2> det{};
    const auto a = generate_streams(stats, StreamTiming{}, 3000000, 0.05, det, 0.5, 22, 1);
    const auto b = generate_streams(stats, StreamTiming{}, 3000000, 0.05, det, 0.5, 22, 3);
    CHECK(a[0].times_ps == b[0].times_ps);
    CHECK(a[1].times_ps == b[1].times_ps);
    std::stringstream x, y;
    write_streams_binary(x, a);
    write_streams_binary(y, b);
    CHECK(x.str() == y.str());
  }
}

TEST_SUITE("budget") {
  TEST_CASE("one misplaced window gives exactly one violation") {
    Gen g(23);
    for (int i = 0; i < 200; ++i) {
      TimingSequence seq;
      switch (g.integer(0, 2)) {
        case 0: seq.detection_length = g.uniform(226e-9, 400e-9); break;
        case 1: seq.pulse_time = g.uniform(252e-9, 480e-9); break;
        default: seq.aom_window = g.uniform(226e-9, 400e-9); seq.pulse_time = 230e-9; break;
      }
      CHECK(validate_sequence(seq).size() == 1);
    }
  }

  TEST_CASE("flux is monotone in survival and the solver inverts it") {
    Gen g(24);
    for (int i = 0; i < 200; ++i) {
      PhaseProgram p;
      p.generation_duration = g.log_uniform(1e-4, 1e-1);
      p.verify_time = g.log_uniform(1e-3, 0.1);
      p.full_reload_time = p.verify_time * g.uniform(2, 100);
      const double fiber = g.log_uniform(1e2, 1e6);
      const double a = g.uniform(0, 1), b = g.uniform(0, 1);
      PhaseProgram pa = p, pb = p;
      pa.survival_probability = std::min(a, b);
      pb.survival_probability = std::max(a, b);
      CHECK(average_flux(fiber, pa) <= average_flux(fiber, pb));
      const double target = average_flux(fiber, pb);
      const double ps = solve_survival(fiber, p, target);
      p.survival_probability = ps;
      CHECK(average_flux(fiber, p) == doctest::Approx(target).epsilon(1e-6));
    }
  }
}

TEST_SUITE("units") {
  TEST_CASE("prefixes rescale consistently") {
    Gen g(25);
    for (int i = 0; i < 200; ++i) {
      const double v = g.log_uniform(1e-3, 1e3);
      std::ostringstream a, b;
      a.precision(17);
      b.precision(17);
      a << v << " ms";
      b << v * 1e6 << " ns";
      CHECK(parse_quantity(a.str(), Dimension::time) ==
            doctest::Approx(parse_quantity(b.str(), Dimension::time)).epsilon(1e-12));
      std::ostringstream c, d;
      c.precision(17);
      d.precision(17);
      c << v << " MHz";
      d << v * 1e3 << " kHz";
      CHECK(parse_quantity(c.str(), Dimension::frequency) ==
            doctest::Approx(parse_quantity(d.str(), Dimension::frequency)).epsilon(1e-12));
    }
  }
}
