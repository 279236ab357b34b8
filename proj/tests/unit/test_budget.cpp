#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tweezer/errors.hpp"
#include "tweezer/sequence_budget.hpp"

using namespace tweezer;

namespace {

// Renewal-cycle flux evaluated independently.
double oracle_flux(double fiber, double t_gen, double ps, double verify, double reload) {
  return fiber * t_gen / (t_gen + ps * verify + (1 - ps) * reload);
}

}  // namespace

TEST_CASE("default sequence is valid") {
  const TimingSequence seq;
  CHECK(validate_sequence(seq).empty());
  CHECK(seq.off_phase() == doctest::Approx(250e-9));
  CHECK(seq.detection_open + seq.detection_length == doctest::Approx(225e-9));
}

TEST_CASE("sequence violations") {
  TimingSequence long_detection;
  long_detection.detection_length = 300e-9;
  const auto v = validate_sequence(long_detection);
  REQUIRE(v.size() == 1);
  CHECK(v[0].message == "detection exceeds off-phase");
  CHECK(v[0].window == "detection");
  CHECK(v[0].container == "off-phase");

  TimingSequence late_pulse;
  late_pulse.pulse_time = 260e-9;
  const auto w = validate_sequence(late_pulse);
  REQUIRE(w.size() == 1);
  CHECK(w[0].message == "pulse in dipole-on phase");

  TimingSequence outside_aom;
  outside_aom.pulse_time = 53e-9;
  const auto x = validate_sequence(outside_aom);
  REQUIRE(x.size() == 1);
  CHECK(x[0].message == "pulse exceeds aom window");

  TimingSequence bad;
  bad.duty = 1.0;
  CHECK_FALSE(validate_sequence(bad).empty());
}

TEST_CASE("pulses per phase") {
  const TimingSequence seq;
  PhaseProgram p;
  CHECK(pulses_per_phase(seq, p) == 4000);
  p.generation_duration = 1e-3;
  CHECK(pulses_per_phase(seq, p) == 2000);
  p.generation_duration = 2.0004e-3;
  CHECK(pulses_per_phase(seq, p) == 4000);
  TimingSequence broken;
  broken.detection_length = 300e-9;
  CHECK_THROWS_AS(pulses_per_phase(broken, p), DomainError);
}

TEST_CASE("collection efficiency") {
  const double eta = collection_efficiency(13500, 2e6, 0.999);
  CHECK(eta == doctest::Approx(0.0068).epsilon(0.01));
  CHECK(eta == doctest::Approx(13500 / (2e6 * 0.999)).epsilon(1e-12));
  CHECK(collection_efficiency(0, 2e6, 0.999) == 0.0);
  CHECK(collection_efficiency(13500, 2e6, 0.4995) == doctest::Approx(2 * eta).epsilon(1e-12));
  CHECK_THROWS_AS(collection_efficiency(13500, 0, 0.999), DomainError);
  CHECK_THROWS_AS(collection_efficiency(13500, 2e6, 0), DomainError);
}

TEST_CASE("average flux") {
  PhaseProgram p;
  CHECK(average_flux(13500, p) == doctest::Approx(170).epsilon(0.01));
  CHECK(average_flux(13500, p) == doctest::Approx(oracle_flux(13500, 2e-3, 0.86, 20e-3, 1.0)).epsilon(1e-12));
  p.survival_probability = 1;
  CHECK(average_flux(13500, p) == doctest::Approx(13500 * 2.0 / 22).epsilon(1e-12));
  CHECK(average_flux(13500, p) == doctest::Approx(1227).epsilon(1e-3));
  p.generation_duration = 1e6;
  CHECK(average_flux(13500, p) == doctest::Approx(13500).epsilon(1e-6));
  p.survival_probability = 1.5;
  CHECK_THROWS_AS(average_flux(13500, p), ConfigError);
}

TEST_CASE("survival solved from the target flux") {
  PhaseProgram p;
  const double ps = solve_survival(13500, p, 170);
  CHECK(ps == doctest::Approx(0.86).epsilon(0.01));
  p.survival_probability = ps;
  CHECK(std::abs(average_flux(13500, p) - 170) < 0.1);
  // Closed-form inverse of the renewal model.
  const double closed = (13500 * 2e-3 / 170 - 2e-3 - 1.0) / (20e-3 - 1.0);
  CHECK(ps == doctest::Approx(closed).epsilon(1e-8));

  const double floor_flux = oracle_flux(13500, 2e-3, 0, 20e-3, 1.0);
  CHECK(solve_survival(13500, PhaseProgram{}, floor_flux) < 1e-8);
  CHECK_THROWS_AS(solve_survival(13500, PhaseProgram{}, 2000), DomainError);
  CHECK_THROWS_AS(solve_survival(13500, PhaseProgram{}, 1), DomainError);
}

TEST_CASE("spectral brightness") {
  CHECK(spectral_brightness(170, 6.07e6) == doctest::Approx(28.0).epsilon(0.005));
  CHECK(spectral_brightness(0, 6.07e6) == 0.0);
  CHECK(spectral_brightness(170, 12.14e6) == doctest::Approx(spectral_brightness(170, 6.07e6) / 2));
  CHECK_THROWS_AS(spectral_brightness(170, 0), DomainError);
}

TEST_CASE("budget report") {
  const auto r = budget_report(TimingSequence{}, PhaseProgram{}, 13500, 0.999, 6.07e6);
  CHECK(r.pulses_per_phase == 4000);
  CHECK(r.pulse_rate == doctest::Approx(2e6));
  CHECK(r.collection_efficiency == doctest::Approx(0.006757).epsilon(1e-3));
  CHECK(r.average_flux == doctest::Approx(170).epsilon(0.01));
  CHECK(r.spectral_brightness == doctest::Approx(28).epsilon(0.02));
}
