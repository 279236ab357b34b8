#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tweezer/pulsed_emitter.hpp"

namespace tweezer {

struct DetectorModel {
  double efficiency = 1;        // on top of the collection efficiency
  double dark_rate = 50;        // counts/s averaged over wall-clock time
  double time_jitter = 0.35e-9; // s, Gaussian rms

  void validate() const;
};

/// Sorted event times in integer picoseconds.
struct TimestampStream {
  std::uint8_t detector_id = 0;
  std::vector<std::int64_t> times_ps;
};

struct StreamTiming {
  double pulse_period = 500e-9;  // s, one excitation per chop period
  double gate_open = 25e-9;      // detection gate, relative to the pulse slot
  double gate_window = 200e-9;

  static StreamTiming from_chain(const PulseChain& chain, double pulse_period);
  void validate() const;
};

/// Simulates an HBT run. Per pulse the photon number and emission times are
/// resampled from `stats`; each photon survives with probability
/// collection_efficiency * detector efficiency, goes to detector 0 with
/// probability splitter_ratio and is jittered. Dark counts are uniform
/// inside the gates, at dark_rate / gate duty while the gate is open.
std::array<TimestampStream, 2> generate_streams(const EmissionStatistics& stats,
                                                const StreamTiming& timing,
                                                std::uint64_t n_pulses,
                                                double collection_efficiency,
                                                const std::array<DetectorModel, 2>& detectors,
                                                double splitter_ratio, std::uint64_t seed,
                                                unsigned jobs = 1);

/// Coincidence histogram of delays t2 - t1. Bin j is centred on j * bin_width
/// and covers [(j - 1/2) w, (j + 1/2) w); bins |j| <= range / bin_width.
struct G2Histogram {
  std::int64_t bin_width_ps = 8000;
  std::int64_t half_bins = 0;  // bins run from -half_bins to +half_bins
  std::vector<std::uint64_t> counts;
  std::vector<double> values;  // counts divided by `normalization`
  double normalization = 1;

  double bin_width() const { return static_cast<double>(bin_width_ps) * 1e-12; }
  double delay(std::size_t i) const;  // bin centre, s
  std::size_t index_of(std::int64_t j) const {
    return static_cast<std::size_t>(j + half_bins);
  }
};

G2Histogram cross_correlate(const TimestampStream& s1, const TimestampStream& s2,
                            double bin_width = 8e-9, double range = 3e-6);

/// All-pairs reference implementation of cross_correlate.
G2Histogram cross_correlate_brute_force(const TimestampStream& s1, const TimestampStream& s2,
                                        double bin_width = 8e-9, double range = 3e-6);

/// Area of each peak k, integrated over [k P - h, k P + h) with fractional
/// bin overlap. Only peaks whose window lies inside the histogram are kept.
std::map<int, double> peak_areas(const G2Histogram& hist, double period = 500e-9,
                                 double half_width = 250e-9);

struct TwoPhotonEstimate {
  double value = 0;
  double error = 0;
  double zero_area = 0;
  double mean_side_area = 0;
  std::size_t side_peaks = 0;
};

/// Half the zero-delay area over the mean side-peak area.
TwoPhotonEstimate two_photon_probability(const std::map<int, double>& areas);
TwoPhotonEstimate two_photon_probability(const G2Histogram& hist, double period = 500e-9,
                                         double half_width = 250e-9);

/// Accidental coincidences in the zero-delay peak.
struct AccidentalModel {
  std::array<double, 2> dark_rate{};    // counts/s, wall-clock average
  std::array<double, 2> signal_rate{};  // counts/s, wall-clock average
  double pulse_rate = 2e6;              // gates per second
  double total_time = 0;                // s
};

struct CorrectedEstimate {
  double value = 0;
  double error = 0;
  double accidental_area = 0;
  bool clamped = false;
  std::string formula;
};

/// Subtracts N (s1 d2 + d1 s2 + d1 d2) from the zero-delay area, with N the
/// number of gates and s_i, d_i the signal and dark counts per gate.
CorrectedEstimate background_correction(const TwoPhotonEstimate& raw,
                                         const AccidentalModel& model);

/// Scales values so that one side peak integrates to period / bin_width,
/// i.e. a flat Poissonian histogram sits at 1.
G2Histogram normalize_histogram(const G2Histogram& hist, double period = 500e-9,
                                double half_width = 250e-9);

/// Mean side-peak shape sampled at offsets j * bin_width from k * period,
/// linearly interpolated between bin centres.
struct PeakProfile {
  std::vector<double> offsets;  // s
  std::vector<double> values;
  double maximum() const;
};
PeakProfile side_peak_profile(const G2Histogram& hist, double period = 500e-9,
                              double half_width = 250e-9);

/// Normalized g2 expected from the emission-time density, one value per bin
/// of `layout`. Side peaks are the autocorrelation of the first-photon
/// density; the zero-delay peak has the same shape times `zero_peak_scale`.
std::vector<double> predicted_g2(const EmissionTimeDistribution& dist, double zero_peak_scale,
                                 const G2Histogram& layout, double period = 500e-9);

void write_streams_binary(std::ostream& out, const std::array<TimestampStream, 2>& streams);
std::array<TimestampStream, 2> read_streams_binary(std::istream& in);
void write_streams_csv(std::ostream& out, const std::array<TimestampStream, 2>& streams);
std::array<TimestampStream, 2> read_streams_csv(std::istream& in);
void write_histogram_csv(std::ostream& out, const G2Histogram& hist);

}  // namespace tweezer
