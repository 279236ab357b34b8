#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "tweezer/chop_dynamics.hpp"
#include "tweezer/errors.hpp"

using namespace tweezer;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kKB = 1.380649e-23;

BeamGeometry on_phase_beam() { return {1.4e-6, 810e-9, 13.8e-3, 0}; }

AtomState small_oscillation() {
  AtomState a;
  a.position = {1.4e-6 / 20, 0, 0};
  return a;
}

double measured_secular(double frequency, double duty, double span) {
  const auto rb = AtomSpecies::rubidium87();
  ChopWaveform w{frequency, duty, 0};
  TrajectoryConfig c;
  c.max_time = span;
  c.record_history = true;
  const auto r = integrate_trajectory(small_oscillation(), w, on_phase_beam(), rb, c);
  return secular_frequency(r.history);
}

}  // namespace

TEST_CASE("chop state") {
  const ChopWaveform w{2e6, 0.5, 0};
  CHECK(chop_state(w, 100e-9) == 1);
  CHECK(chop_state(w, 300e-9) == 0);
  CHECK(chop_state(w, 600e-9) == 1);
  CHECK(chop_state(w, 800e-9) == 0);
  const ChopWaveform nearly{2e6, 1 - 1e-6, 0};
  int on = 0;
  for (int i = 0; i < 10000; ++i) on += chop_state(nearly, i * 0.5e-6 / 10000.0 + 0.25e-6);
  CHECK(on >= 9999);

  const ChopWaveform q{1e6, 0.3, 0.1e-6};
  int sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += chop_state(q, (i + 0.5) * 1e-6 / n);
  CHECK(sum / static_cast<double>(n) == doctest::Approx(0.3).epsilon(1e-4));
  CHECK(chop_state(ChopWaveform{2e6, 1.0, 0}, 0.4e-6) == 1);
}

TEST_CASE("waveform validation") {
  CHECK_THROWS_AS(ChopWaveform({0, 0.5, 0}).validate(), ConfigError);
  CHECK_THROWS_AS(ChopWaveform({1e6, 0, 0}).validate(), ConfigError);
  CHECK_THROWS_AS(ChopWaveform({1e6, 1.2, 0}).validate(), ConfigError);
  CHECK_NOTHROW(ChopWaveform({1e6, 1.0, 0}).validate());
}

TEST_CASE("thermal ensemble") {
  const auto rb = AtomSpecies::rubidium87();
  const auto g = on_phase_beam();
  const double T = 100e-6;
  const auto atoms = sample_thermal_ensemble(T, g, rb, 10000, 7);
  REQUIRE(atoms.size() == 10000);
  const double m = rb.mass;
  for (int k = 0; k < 3; ++k) {
    double ke = 0;
    for (const auto& a : atoms) ke += 0.5 * m * a.velocity[k] * a.velocity[k];
    ke /= atoms.size();
    CHECK(ke == doctest::Approx(0.5 * kKB * T).epsilon(0.02));
  }
  const double wr = 2 * kPi * trap_frequencies(rb, g)[0];
  double var = 0;
  for (const auto& a : atoms) var += a.position[0] * a.position[0];
  var /= atoms.size();
  CHECK(var == doctest::Approx(kKB * T / (m * wr * wr)).epsilon(0.03));

  const auto cold = sample_thermal_ensemble(0.0, g, rb, 10, 7);
  for (const auto& a : cold)
    for (int k = 0; k < 3; ++k) {
      CHECK(a.position[k] == 0.0);
      CHECK(a.velocity[k] == 0.0);
    }
  CHECK_THROWS_AS(sample_thermal_ensemble(6e-3, g, rb, 10, 7), DomainError);
}

TEST_CASE("static trap conserves energy") {
  const auto rb = AtomSpecies::rubidium87();
  TrajectoryConfig c;
  c.max_time = 1e-3;
  c.time_step = 1e-9;
  c.record_history = true;
  AtomState a;
  a.position = {0.3e-6, 0.1e-6, 1e-6};
  a.velocity = {0.05, 0, 0.02};
  const auto r = integrate_trajectory(a, ChopWaveform{2e6, 1.0, 0}, on_phase_beam(), rb, c);
  REQUIRE(r.history.size() > 100);
  const double e0 = r.history.front().energy;
  double worst = 0;
  for (const auto& s : r.history) worst = std::max(worst, std::abs(s.energy - e0));
  CHECK(worst / std::abs(e0) < 1e-6);
  CHECK(r.final_state.alive);
}

TEST_CASE("step limit") {
  const auto rb = AtomSpecies::rubidium87();
  const ChopWaveform w{2e6, 0.5, 0};
  const double limit = max_time_step(w, rb, on_phase_beam());
  CHECK(limit == doctest::Approx(1 / (50 * 2e6)));
  TrajectoryConfig c;
  c.time_step = 2 * limit;
  CHECK_THROWS_AS(integrate_trajectory(AtomState{}, w, on_phase_beam(), rb, c), ConfigError);
  c.time_step = 0;
  c.loss_radius_factor = 2;
  CHECK_THROWS_AS(integrate_trajectory(AtomState{}, w, on_phase_beam(), rb, c), ConfigError);
}

TEST_CASE("fast chopping holds a 100 uK atom, slow chopping loses it") {
  const auto rb = AtomSpecies::rubidium87();
  const auto g = on_phase_beam();
  const auto atoms = sample_thermal_ensemble(100e-6, g, rb, 200, 11);
  TrajectoryConfig c;
  c.max_time = 10e-3;
  c.rng_seed = 5;
  const auto fast = survival_curve(atoms, ChopWaveform{2e6, 0.5, 0}, g, rb, c, 11);
  CHECK(fast.fraction.back() > 0.95);
  const auto slow = survival_curve(atoms, ChopWaveform{100e3, 0.5, 0}, g, rb, c, 11);
  CHECK(slow.fraction.back() < 0.5);
  for (std::size_t i = 1; i < slow.fraction.size(); ++i)
    CHECK(slow.fraction[i] <= slow.fraction[i - 1]);
}

TEST_CASE("gas-limited lifetime") {
  const auto rb = AtomSpecies::rubidium87();
  const auto g = on_phase_beam();
  const auto atoms = sample_thermal_ensemble(100e-6, g, rb, 200, 3);
  TrajectoryConfig c;
  c.max_time = 1.0;
  const ChopWaveform still{2e6, 1.0, 0};
  const auto flat = survival_curve(atoms, still, g, rb, c, 21);
  for (const double f : flat.fraction) CHECK(f == 1.0);

  c.background_gas_rate = 2.5;
  const auto curve = survival_curve(atoms, still, g, rb, c, 41);
  const auto fit = fit_exponential(curve.times, curve.fraction);
  REQUIRE(fit.ok);
  CHECK(fit.lifetime == doctest::Approx(0.4).epsilon(0.05));
  CHECK(fit.amplitude == doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS(survival_curve({}, still, g, rb, c), DomainError);
}

TEST_CASE("exponential fit reports failures") {
  CHECK_FALSE(fit_exponential({0, 1, 2}, {1, 1, 1}).ok);
  CHECK_FALSE(fit_exponential({0, 1}, {1, 0.5}).ok);
  CHECK_FALSE(fit_exponential({0, 1, 2}, {1, 0.5}).ok);
  const auto fit = fit_exponential({0, 1, 2, 3}, {1, std::exp(-0.5), std::exp(-1.0), std::exp(-1.5)});
  REQUIRE(fit.ok);
  CHECK(fit.lifetime == doctest::Approx(2.0));
}

TEST_CASE("secular frequency") {
  const double static_f = measured_secular(2e6, 1.0, 2e-3);
  CHECK(static_f == doctest::Approx(167e3).epsilon(0.02));
  CHECK(measured_secular(4e6, 0.5, 2e-3) == doctest::Approx(118e3).epsilon(0.03));
  CHECK(measured_secular(8e6, 0.25, 2e-3) == doctest::Approx(83.5e3).epsilon(0.03));

  const auto rb = AtomSpecies::rubidium87();
  TrajectoryConfig c;
  c.max_time = 2e-3;
  c.record_history = true;
  const auto still = integrate_trajectory(AtomState{}, ChopWaveform{2e6, 1.0, 0}, on_phase_beam(), rb, c);
  CHECK_THROWS_AS(secular_frequency(still.history), ComputationError);
}

TEST_CASE("identical seeds give identical trajectories") {
  const auto rb = AtomSpecies::rubidium87();
  const auto g = on_phase_beam();
  const auto a1 = sample_thermal_ensemble(200e-6, g, rb, 50, 99);
  const auto a2 = sample_thermal_ensemble(200e-6, g, rb, 50, 99);
  TrajectoryConfig c;
  c.max_time = 2e-3;
  c.background_gas_rate = 100;
  c.rng_seed = 4;
  const ChopWaveform w{300e3, 0.5, 0};
  const auto s1 = survival_curve(a1, w, g, rb, c, 11, 1);
  const auto s2 = survival_curve(a2, w, g, rb, c, 11, 3);
  CHECK(s1.fraction == s2.fraction);
  CHECK(s1.loss_times == s2.loss_times);
  const auto r1 = integrate_trajectory(a1[0], w, g, rb, c);
  const auto r2 = integrate_trajectory(a2[0], w, g, rb, c);
  CHECK(r1.final_state.position == r2.final_state.position);
  CHECK(r1.final_state.alive == r2.final_state.alive);
}
