// Command-line front end: trap parameters, figure datasets and the budget.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tweezer/config.hpp"
#include "tweezer/constants.hpp"
#include "tweezer/errors.hpp"
#include "tweezer/random.hpp"
#include "tweezer/units.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace tweezer;

namespace {

struct Common {
  std::string config = TWEEZER_DEFAULT_CONFIG;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> jobs;
};

RunConfig load(const Common& c) {
  RunConfig cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.output_dir = *c.out;
  if (c.jobs) cfg.jobs = *c.jobs;
  fs::create_directories(cfg.output_dir);
  return cfg;
}

std::ofstream open_out(const RunConfig& cfg, const std::string& name,
                       std::ios::openmode mode = std::ios::out) {
  std::ofstream f(cfg.output_dir / name, mode);
  if (!f) throw ConfigError("cannot write '" + (cfg.output_dir / name).string() + "'");
  f.precision(10);
  return f;
}

void emit(const RunConfig& cfg, const std::string& name, const json& report) {
  open_out(cfg, name) << report.dump(2) << '\n';
  std::cout << report.dump(2) << '\n';
}

int cmd_trap_params(const Common& common, const std::optional<std::string>& power) {
  RunConfig cfg = load(common);
  BeamGeometry beam = cfg.trap;
  if (power) beam.power = parse_quantity(*power, Dimension::power);
  const double depth = trap_depth(cfg.species, beam);
  const auto on = trap_parameters(cfg.species, beam.with_power(beam.power / cfg.chop.duty_cycle));
  json r;
  r["power_W"] = beam.power;
  r["depth_mK"] = depth * 1e3;
  r["on_phase_power_W"] = beam.power / cfg.chop.duty_cycle;
  r["on_phase_depth_mK"] = on.depth_temperature * 1e3;
  r["radial_frequency_kHz"] = on.radial_frequency * 1e-3;
  r["axial_frequency_kHz"] = on.axial_frequency * 1e-3;
  r["rayleigh_range_um"] = on.rayleigh_range * 1e6;
  emit(cfg, "trap_params.json", r);
  return 0;
}

int cmd_fig2(const Common& common) {
  RunConfig cfg = load(common);
  const auto& t = cfg.telegraph;
  const auto path = simulate_occupancy(t.occupancy, t.duration, cfg.seed);
  const auto trace = trace_from_occupancy(path, t.background_rate, t.single_atom_rate,
                                          t.bin_width, derive_seed(cfg.seed, 1));
  const auto hist = histogram_of(trace);
  {
    auto f = open_out(cfg, "fig2_trace.csv");
    f << "bin_start_s,counts\n";
    for (std::size_t i = 0; i < trace.counts.size(); ++i)
      f << trace.start_time + static_cast<double>(i) * trace.bin_width << ',' << trace.counts[i] << '\n';
  }
  const auto fit = fit_compound_poisson(hist, t.k_max, t.bin_width);
  {
    auto f = open_out(cfg, "fig2_histogram.csv");
    f << "counts,bins,model\n";
    const double n = static_cast<double>(trace.counts.size());
    for (std::size_t k = 0; k < hist.size(); ++k)
      f << k << ',' << hist[k] << ',' << n * fit.model.pmf(static_cast<std::int64_t>(k)) << '\n';
  }
  {
    json h = json::object();
    for (std::size_t k = 0; k < hist.size(); ++k)
      if (hist[k] > 0) h[std::to_string(k)] = hist[k];
    open_out(cfg, "fig2_histogram.json") << h.dump(2) << '\n';
  }
  const auto threshold = atom_threshold(fit.model.background_rate,
                                        std::max(fit.model.single_atom_rate, 1e-9), t.bin_width);
  json r;
  r["bins"] = trace.counts.size();
  r["weights"] = fit.model.weights;
  r["weight_errors"] = fit.weight_errors;
  r["background_rate"] = fit.model.background_rate;
  r["background_rate_error"] = fit.background_rate_error;
  r["single_atom_rate"] = fit.model.single_atom_rate;
  r["single_atom_rate_error"] = fit.single_atom_rate_error;
  r["log_likelihood"] = fit.log_likelihood;
  r["degenerate"] = fit.degenerate;
  r["occupied_fraction"] = path.integral(0, path.duration) / path.duration;
  r["threshold"] = threshold.threshold;
  r["threshold_total_error"] = threshold.total_error();
  r["loading_events"] = detect_loading(trace, threshold.threshold).size();
  emit(cfg, "fig2_fit.json", r);
  return 0;
}

int cmd_fig3a(const Common& common, const std::vector<std::string>& freqs) {
  RunConfig cfg = load(common);
  std::vector<double> f = cfg.dynamics.frequencies;
  if (!freqs.empty()) {
    f.clear();
    for (const auto& s : freqs) f.push_back(parse_quantity(s, Dimension::frequency));
  }
  if (f.empty()) throw ConfigError("fig3a: empty frequency list");
  const auto beam = cfg.on_phase_beam();
  const auto ensemble = sample_thermal_ensemble(cfg.dynamics.temperature, beam, cfg.species,
                                                cfg.dynamics.atoms, cfg.seed);
  TrajectoryConfig tc = cfg.dynamics.trajectory;
  tc.rng_seed = derive_seed(cfg.seed, 2);
  const auto points = lifetime_vs_chop(f, ensemble, cfg.chop, beam, cfg.species, tc, cfg.jobs);
  auto out = open_out(cfg, "fig3a_lifetime.csv");
  out << "frequency_Hz,lifetime_s,fit_error_s,survival_at_end,fit_ok\n";
  json r = json::array();
  for (const auto& p : points) {
    out << p.frequency << ',' << p.fit.lifetime << ',' << p.fit.lifetime_error << ','
        << p.survival_at_end << ',' << (p.fit.ok ? 1 : 0) << '\n';
    r.push_back({{"frequency_Hz", p.frequency}, {"lifetime_s", p.fit.lifetime},
                 {"fit_error_s", p.fit.lifetime_error}, {"survival_at_end", p.survival_at_end},
                 {"fit_ok", p.fit.ok}, {"message", p.fit.message}});
  }
  std::cout << r.dump(2) << '\n';
  return 0;
}

int cmd_fig4(const Common& common, bool write_streams) {
  RunConfig cfg = load(common);
  const double gamma = cfg.species.d2_linewidth;
  const auto cal = calibrate_pi_pulse(cfg.chain, gamma, cfg.emitter.excitation.detuning);
  JumpOptions mc;
  mc.jobs = cfg.jobs;
  const auto stats = jump_monte_carlo(cfg.chain, cal.omega_peak, gamma,
                                      cfg.emitter.excitation.detuning, cfg.emitter.trajectories,
                                      derive_seed(cfg.seed, 3), mc);
  const double pulse_rate = cfg.chop.frequency;
  const double eta = cfg.hbt.collection_efficiency > 0
                         ? cfg.hbt.collection_efficiency
                         : collection_efficiency(cfg.budget.fiber_rate, pulse_rate,
                                                 cfg.budget.window_probability);
  const auto streams = generate_streams(stats, StreamTiming::from_chain(cfg.chain, cfg.chop.period()),
                                        cfg.hbt.pulses, eta, cfg.hbt.detectors,
                                        cfg.hbt.splitter_ratio, derive_seed(cfg.seed, 4), cfg.jobs);
  if (write_streams) {
    auto f = open_out(cfg, "fig4_streams.bin", std::ios::out | std::ios::binary);
    write_streams_binary(f, streams);
  }
  const auto hist = cross_correlate(streams[0], streams[1], cfg.hbt.bin_width, cfg.hbt.range);
  const auto raw = two_photon_probability(hist, cfg.chop.period());
  const double total_time = static_cast<double>(cfg.hbt.pulses) / pulse_rate;
  AccidentalModel acc;
  acc.pulse_rate = pulse_rate;
  acc.total_time = total_time;
  for (int i = 0; i < 2; ++i) {
    acc.dark_rate[i] = cfg.hbt.detectors[i].dark_rate;
    acc.signal_rate[i] = std::max(
        0.0, static_cast<double>(streams[i].times_ps.size()) / total_time - acc.dark_rate[i]);
  }
  const auto corrected = background_correction(raw, acc);
  const auto norm = normalize_histogram(hist, cfg.chop.period());
  const auto dist = emission_time_distribution(cfg.chain, cal.omega_peak, gamma,
                                               cfg.emitter.excitation.detuning);
  const double mean_n = stats.p1 + 2 * stats.p2plus;
  const auto overlay = predicted_g2(dist, 2 * stats.p2plus / (mean_n * mean_n), norm, cfg.chop.period());
  {
    auto f = open_out(cfg, "fig4_g2.csv");
    f << "delay_ns,counts,normalized,predicted\n";
    for (std::size_t i = 0; i < norm.counts.size(); ++i)
      f << norm.delay(i) * 1e9 << ',' << norm.counts[i] << ',' << norm.values[i] << ','
        << overlay[i] << '\n';
  }
  {
    auto f = open_out(cfg, "fig4_emission.csv");
    f << "time_ns,first_photon_density_per_ns,emission_rate_per_ns,rabi_envelope_rad_per_ns\n";
    for (std::size_t i = 0; i < dist.times.size(); i += 10)
      f << dist.times[i] * 1e9 << ',' << dist.first_photon_density[i] * 1e-9 << ','
        << dist.emission_rate[i] * 1e-9 << ','
        << rabi_envelope(cfg.chain, cal.omega_peak, dist.times[i]) * 1e-9 << '\n';
  }
  json r;
  r["omega_peak_rad_per_s"] = cal.omega_peak;
  r["excited_population_after_pulse"] = cal.excited_population;
  r["window_probability"] = dist.window_probability;
  r["p0"] = stats.p0;
  r["p1"] = stats.p1;
  r["p2plus"] = stats.p2plus;
  r["p2plus_error"] = stats.p2plus_error;
  r["collection_efficiency"] = eta;
  r["pulses"] = cfg.hbt.pulses;
  r["clicks"] = json::array({streams[0].times_ps.size(), streams[1].times_ps.size()});
  r["raw_p2"] = raw.value;
  r["raw_p2_error"] = raw.error;
  r["zero_area"] = raw.zero_area;
  r["mean_side_area"] = raw.mean_side_area;
  r["corrected_p2"] = corrected.value;
  r["corrected_p2_error"] = corrected.error;
  r["accidental_area"] = corrected.accidental_area;
  r["correction_clamped"] = corrected.clamped;
  r["correction_formula"] = corrected.formula;
  emit(cfg, "fig4_report.json", r);
  return 0;
}

int cmd_budget(const Common& common) {
  RunConfig cfg = load(common);
  PhaseProgram program = cfg.program;
  if (cfg.budget.target_flux > 0)
    program.survival_probability =
        solve_survival(cfg.budget.fiber_rate, program, cfg.budget.target_flux);
  const auto rep = budget_report(cfg.sequence(), program, cfg.budget.fiber_rate,
                                 cfg.budget.window_probability, cfg.species.natural_linewidth_hz());
  json r;
  r["pulses_per_phase"] = rep.pulses_per_phase;
  r["pulse_rate"] = rep.pulse_rate;
  r["fiber_photon_rate"] = rep.fiber_photon_rate;
  r["collection_efficiency"] = rep.collection_efficiency;
  r["survival_probability"] = rep.survival_probability;
  r["average_flux"] = rep.average_flux;
  r["natural_linewidth_MHz"] = cfg.species.natural_linewidth_hz() * 1e-6;
  r["spectral_brightness_per_s_MHz"] = rep.spectral_brightness;
  emit(cfg, "budget.json", r);
  return 0;
}

int fail(int code, const char* kind, const std::string& message) {
  json e;
  e["error"] = kind;
  e["message"] = message;
  std::cerr << e.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fiber-pigtailed optical tweezer simulator"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Run configuration (JSON)");
    sub->add_option("--seed", common.seed, "Master seed");
    sub->add_option("--out", common.out, "Output directory");
    sub->add_option("--jobs", common.jobs, "Worker threads");
  };

  std::optional<std::string> power;
  auto* trap = app.add_subcommand("trap-params", "Trap depth and frequencies");
  add_common(trap);
  trap->add_option("--power", power, "Time-averaged trap power, e.g. 13.8mW");

  auto* fig2 = app.add_subcommand("fig2", "Telegraph trace, histogram and compound Poisson fit");
  add_common(fig2);

  std::vector<std::string> freqs;
  auto* fig3a = app.add_subcommand("fig3a", "Trap lifetime versus chop frequency");
  add_common(fig3a);
  fig3a->add_option("--freqs", freqs, "Chop frequencies, e.g. 0.3MHz 1MHz")->expected(1, -1);

  bool write_streams = false;
  auto* fig4 = app.add_subcommand("fig4", "HBT simulation and two-photon probability");
  add_common(fig4);
  fig4->add_flag("--write-streams", write_streams, "Also write the binary timestamp streams");

  auto* budget = app.add_subcommand("budget", "Photon flux and brightness budget");
  add_common(budget);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "usage", e.what());
  }

  try {
    if (*trap) return cmd_trap_params(common, power);
    if (*fig2) return cmd_fig2(common);
    if (*fig3a) return cmd_fig3a(common, freqs);
    if (*fig4) return cmd_fig4(common, write_streams);
    if (*budget) return cmd_budget(common);
  } catch (const ConfigError& e) {
    return fail(2, "config", e.what());
  } catch (const DomainError& e) {
    return fail(2, "domain", e.what());
  } catch (const UnsupportedRegime& e) {
    return fail(2, "unsupported_regime", e.what());
  } catch (const ComputationError& e) {
    return fail(3, "computation", e.what());
  } catch (const std::exception& e) {
    return fail(3, "internal", e.what());
  }
  return 0;
}
