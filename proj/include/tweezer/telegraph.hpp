#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tweezer/errors.hpp"

namespace tweezer {

struct OccupancyModel {
  double loading_rate = 1.0;  // atoms/s
  double loss_rate = 2.5;     // 1/s per atom
  bool blockade = true;

  void validate() const;
};

/// Piecewise-constant atom number: levels[i] holds on [times[i], times[i+1]),
/// the last level until `duration`. times[0] == 0.
struct OccupancyPath {
  std::vector<double> times;
  std::vector<int> levels;
  double duration = 0;

  /// Time integral of the occupancy over [a, b).
  double integral(double a, double b) const;
  int max_level() const;
};

struct CountTrace {
  double bin_width = 10e-3;  // s
  double start_time = 0;     // s
  std::vector<std::int64_t> counts;
};

/// Mixture of Poisson laws with means (b + k s) T for k = 0..k_max.
struct CompoundPoissonModel {
  std::vector<double> weights;
  double background_rate = 0;   // counts/s
  double single_atom_rate = 0;  // counts/s
  double bin_width = 0;         // s

  double component_mean(std::size_t k) const {
    return (background_rate + static_cast<double>(k) * single_atom_rate) * bin_width;
  }
  double pmf(std::int64_t n) const;
};

/// Count histogram: entry n holds the number of bins with n counts.
using CountHistogram = std::vector<std::uint64_t>;

/// Continuous-time Markov occupancy path. With blockade, a loading event
/// while occupied removes both atoms at once.
OccupancyPath simulate_occupancy(const OccupancyModel& model, double duration,
                                 std::uint64_t seed);

/// Poisson counts per bin with mean integral of (b + n(t) s) over the bin.
CountTrace trace_from_occupancy(const OccupancyPath& path, double background_rate,
                                double single_atom_rate, double bin_width, std::uint64_t seed);

CountHistogram histogram_of(const CountTrace& trace);

struct CompoundPoissonFit {
  CompoundPoissonModel model;
  double log_likelihood = 0;
  /// Standard errors from the observed information; NaN where a parameter
  /// sits on its boundary or is not identifiable.
  std::vector<double> weight_errors;
  double background_rate_error = 0;
  double single_atom_rate_error = 0;
  int iterations = 0;
  bool degenerate = false;  // single-component model preferred by BIC
};

/// Non-convergent fit; carries the last EM iterate.
class FitError : public ComputationError {
 public:
  FitError(const std::string& what, CompoundPoissonFit last)
      : ComputationError(what), last_iterate(std::move(last)) {}
  CompoundPoissonFit last_iterate;
};

/// Maximum-likelihood compound-Poisson fit via EM on the weights plus Newton
/// refinement of (b, s). Throws FitError when it does not converge.
CompoundPoissonFit fit_compound_poisson(const CountHistogram& histogram, int k_max,
                                        double bin_width);

struct ThresholdChoice {
  std::int64_t threshold = 0;
  double false_positive = 0;  // P(background bin > threshold)
  double false_negative = 0;  // P(one-atom bin <= threshold)
  bool overlap_warning = false;

  double total_error() const { return false_positive + false_negative; }
};

/// Integer threshold minimising the equal-prior misclassification between
/// background and single-atom bins. Throws DomainError unless s > 0.
ThresholdChoice atom_threshold(double background_rate, double single_atom_rate,
                               double bin_width);

/// End time of the n-th consecutive above-threshold bin after every period
/// with at least one bin at or below threshold. The trace is assumed to start
/// unloaded.
std::vector<double> detect_loading(const CountTrace& trace, std::int64_t threshold,
                                   int n_consecutive = 2);

struct DwellEstimate {
  double lifetime = 0;  // s
  double ci_low = 0;    // 95% confidence interval
  double ci_high = 0;
  std::size_t complete_dwells = 0;
  std::size_t censored_dwells = 0;
};

/// Censoring-aware exponential MLE from occupied-dwell durations.
DwellEstimate dwell_lifetime(const OccupancyPath& path);
DwellEstimate dwell_lifetime(const CountTrace& trace, std::int64_t threshold);

/// MLE from explicit durations; `censored` dwells only contribute exposure.
DwellEstimate dwell_lifetime(const std::vector<double>& complete,
                             const std::vector<double>& censored);

}  // namespace tweezer
