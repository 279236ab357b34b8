#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "tweezer/config.hpp"
#include "tweezer/errors.hpp"
#include "tweezer/units.hpp"

using namespace tweezer;

namespace {

const std::filesystem::path kSource = TWEEZER_SOURCE_DIR;

std::string minimal(const std::string& extra = "") {
  return R"({"trap": {"waist": "1.4 um", "wavelength": "810 nm", "average_power": "6.9 mW"})" +
         extra + "}";
}

}  // namespace

TEST_CASE("quantities") {
  CHECK(parse_quantity("13.8 mW", Dimension::power) == doctest::Approx(13.8e-3));
  CHECK(parse_quantity("1.4 um", Dimension::length) == doctest::Approx(1.4e-6));
  CHECK(parse_quantity("1.4 µm", Dimension::length) == doctest::Approx(1.4e-6));
  CHECK(parse_quantity("500 ns", Dimension::time) == doctest::Approx(500e-9));
  CHECK(parse_quantity("2 MHz", Dimension::frequency) == doctest::Approx(2e6));
  CHECK(parse_quantity("100 uK", Dimension::temperature) == doctest::Approx(100e-6));
  CHECK(parse_quantity("2.5 /s", Dimension::rate) == doctest::Approx(2.5));
  CHECK(parse_quantity("0.7 %", Dimension::dimensionless) == doctest::Approx(0.007));
  CHECK(parse_quantity("42", Dimension::length) == 42.0);
  CHECK_THROWS_AS(parse_quantity("5 mW", Dimension::length), ConfigError);
  CHECK_THROWS_AS(parse_quantity("five ns", Dimension::time), ConfigError);
  CHECK_THROWS_AS(parse_quantity("5 furlongs", Dimension::length), ConfigError);
  CHECK_THROWS_AS(parse_quantity("", Dimension::time), ConfigError);
}

TEST_CASE("shipped configuration") {
  const auto c = load_config(kSource / "configs" / "default.json");
  CHECK_NOTHROW(c.validate());
  CHECK(c.trap.waist_w0 == doctest::Approx(1.4e-6));
  CHECK(c.trap.power == doctest::Approx(6.9e-3));
  CHECK(c.on_phase_beam().power == doctest::Approx(13.8e-3));
  CHECK(c.chop.frequency == doctest::Approx(2e6));
  CHECK(c.chain.off_phase == doctest::Approx(250e-9));
  CHECK(c.chain.eom_extinction_intensity == 800);
  CHECK(c.hbt.detectors[0].dark_rate == doctest::Approx(50));
  CHECK(c.hbt.bin_width == doctest::Approx(8e-9));
  CHECK(c.telegraph.bin_width == doctest::Approx(10e-3));
  CHECK(c.program.generation_duration == doctest::Approx(2e-3));
  CHECK(c.budget.fiber_rate == doctest::Approx(13500));
  CHECK(c.species.name == AtomSpecies::rubidium87().name);
  CHECK(c.seed == 20100);
  const auto seq = c.sequence();
  CHECK(validate_sequence(seq).empty());
  CHECK(seq.chop_period == doctest::Approx(500e-9));
}

TEST_CASE("defaults fill a minimal configuration") {
  const auto c = parse_config(minimal());
  CHECK_NOTHROW(c.validate());
  CHECK(c.chop.duty_cycle == 0.5);
  CHECK(c.dynamics.temperature == doctest::Approx(100e-6));
  CHECK(c.chain.eom_duration == doctest::Approx(3.5e-9));
  CHECK(c.hbt.splitter_ratio == 0.5);
}

TEST_CASE("configuration errors") {
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_config("{}"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"trap": {}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(minimal(R"(, "colour": "blue")")), ConfigError);
  CHECK_THROWS_AS(parse_config(minimal(R"(, "chop": {"frequency": "2 MHz", "dutycycle": 0.5})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(minimal(R"(, "chop": {"frequency": "2 mW"})")), ConfigError);
  CHECK_THROWS_AS(parse_config(minimal(R"(, "seed": -3)")), ConfigError);
  CHECK_THROWS_AS(parse_config(minimal(R"(, "hbt": {"detectors": [{}]})")), ConfigError);
  CHECK_THROWS_AS(load_config(kSource / "configs" / "does_not_exist.json"), ConfigError);

  CHECK_THROWS_AS(parse_config(minimal(R"(, "pulse_chain": {"detection_window": "300 ns"})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(minimal(R"(, "chop": {"duty_cycle": 1})")), ConfigError);
}
