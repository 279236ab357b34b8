#include "tweezer/telegraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>

#include "tweezer/random.hpp"

namespace tweezer {

void OccupancyModel::validate() const {
  if (!(loading_rate >= 0)) throw ConfigError("occupancy: loading_rate must be >= 0");
  if (!(loss_rate >= 0)) throw ConfigError("occupancy: loss_rate must be >= 0");
}

double OccupancyPath::integral(double a, double b) const {
  a = std::max(a, 0.0);
  b = std::min(b, duration);
  if (!(b > a) || times.empty()) return 0;
  auto i = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), a) - times.begin()) - 1;
  double acc = 0;
  for (; i < times.size() && times[i] < b; ++i) {
    const double end = i + 1 < times.size() ? times[i + 1] : duration;
    const double lo = std::max(a, times[i]);
    const double hi = std::min(b, end);
    if (hi > lo) acc += levels[i] * (hi - lo);
  }
  return acc;
}

int OccupancyPath::max_level() const {
  return levels.empty() ? 0 : *std::max_element(levels.begin(), levels.end());
}

double CompoundPoissonModel::pmf(std::int64_t n) const {
  double p = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double mu = component_mean(k);
    if (mu <= 0) {
      p += n == 0 ? weights[k] : 0.0;
      continue;
    }
    const double x = static_cast<double>(n);
    p += weights[k] * std::exp(x * std::log(mu) - mu - std::lgamma(x + 1));
  }
  return p;
}

OccupancyPath simulate_occupancy(const OccupancyModel& model, double duration,
                                 std::uint64_t seed) {
  model.validate();
  if (!(duration > 0)) throw DomainError("simulate_occupancy: duration must be > 0");
  Rng rng = make_rng(seed, 0);
  OccupancyPath path;
  path.duration = duration;
  path.times.push_back(0);
  path.levels.push_back(0);
  int n = 0;
  double t = 0;
  while (true) {
    const double load = model.loading_rate;
    const double loss = model.loss_rate * n;
    const double total = load + loss;
    if (total <= 0) break;
    t += -std::log1p(-uniform01(rng)) / total;
    if (t >= duration) break;
    if (uniform01(rng) * total < load) {
      n = (model.blockade && n >= 1) ? 0 : n + 1;  // pair loss under blockade
    } else {
      --n;
    }
    path.times.push_back(t);
    path.levels.push_back(n);
  }
  return path;
}

CountTrace trace_from_occupancy(const OccupancyPath& path, double background_rate,
                                double single_atom_rate, double bin_width,
                                std::uint64_t seed) {
  if (!(background_rate >= 0) || !(single_atom_rate >= 0))
    throw DomainError("trace_from_occupancy: rates must be >= 0");
  if (!(bin_width > 0)) throw DomainError("trace_from_occupancy: bin_width must be > 0");
  const auto nbins = static_cast<std::size_t>(std::floor(path.duration / bin_width + 1e-9));
  if (nbins == 0) throw DomainError("trace_from_occupancy: duration shorter than one bin");
  CountTrace trace;
  trace.bin_width = bin_width;
  trace.counts.resize(nbins);
  Rng rng = make_rng(seed, 1);

  std::size_t seg = 0;
  for (std::size_t i = 0; i < nbins; ++i) {
    const double a = static_cast<double>(i) * bin_width;
    const double b = a + bin_width;
    while (seg + 1 < path.times.size() && path.times[seg + 1] <= a) ++seg;
    double occupied = 0;
    for (std::size_t j = seg; j < path.times.size() && path.times[j] < b; ++j) {
      const double end = j + 1 < path.times.size() ? path.times[j + 1] : path.duration;
      const double lo = std::max(a, path.times[j]);
      const double hi = std::min(b, end);
      if (hi > lo) occupied += path.levels[j] * (hi - lo);
    }
    const double mean = background_rate * bin_width + single_atom_rate * occupied;
    if (mean > 0) {
      std::poisson_distribution<std::int64_t> poisson(mean);
      trace.counts[i] = poisson(rng);
    }
  }
  return trace;
}

CountHistogram histogram_of(const CountTrace& trace) {
  CountHistogram h;
  for (const auto c : trace.counts) {
    const auto n = static_cast<std::size_t>(c);
    if (n >= h.size()) h.resize(n + 1, 0);
    ++h[n];
  }
  return h;
}

namespace {

double log_poisson(double n, double mu) {
  if (mu <= 0) return n == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return n * std::log(mu) - mu - std::lgamma(n + 1);
}

struct Observed {
  std::vector<double> value;
  std::vector<double> count;
  double total = 0;
};

Observed compress(const CountHistogram& h) {
  Observed o;
  for (std::size_t n = 0; n < h.size(); ++n)
    if (h[n] > 0) {
      o.value.push_back(static_cast<double>(n));
      o.count.push_back(static_cast<double>(h[n]));
      o.total += static_cast<double>(h[n]);
    }
  return o;
}

// Log-likelihood of the mixture with component means lam0 + k lam1.
double mixture_loglik(const Observed& o, const std::vector<double>& w, double lam0, double lam1) {
  double ll = 0;
  for (std::size_t i = 0; i < o.value.size(); ++i) {
    double f = 0;
    for (std::size_t k = 0; k < w.size(); ++k)
      if (w[k] > 0) f += w[k] * std::exp(log_poisson(o.value[i], lam0 + static_cast<double>(k) * lam1));
    ll += o.count[i] * std::log(std::max(f, std::numeric_limits<double>::min()));
  }
  return ll;
}

// Gradient of the log-likelihood with respect to (w_1..w_K, lam0, lam1),
// where w_0 = 1 - sum(w_1..w_K).
Eigen::VectorXd mixture_gradient(const Observed& o, const std::vector<double>& w, double lam0,
                                 double lam1) {
  const std::size_t K = w.size() - 1;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K + 2));
  std::vector<double> p(w.size());
  for (std::size_t i = 0; i < o.value.size(); ++i) {
    const double x = o.value[i];
    double f = 0, d0 = 0, d1 = 0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double mu = lam0 + static_cast<double>(k) * lam1;
      p[k] = std::exp(log_poisson(x, mu));
      f += w[k] * p[k];
      const double dmu = mu > 0 ? (x / mu - 1) * p[k] : 0.0;
      d0 += w[k] * dmu;
      d1 += w[k] * static_cast<double>(k) * dmu;
    }
    if (f <= 0) continue;
    const double s = o.count[i] / f;
    for (std::size_t k = 1; k <= K; ++k) g[static_cast<Eigen::Index>(k - 1)] += s * (p[k] - p[0]);
    g[static_cast<Eigen::Index>(K)] += s * d0;
    g[static_cast<Eigen::Index>(K + 1)] += s * d1;
  }
  return g;
}

std::int64_t otsu_split(const Observed& o) {
  double best = -1;
  std::int64_t split = static_cast<std::int64_t>(o.value.front());
  const double total = o.total;
  double sum_all = 0;
  for (std::size_t i = 0; i < o.value.size(); ++i) sum_all += o.value[i] * o.count[i];
  double n_lo = 0, sum_lo = 0;
  for (std::size_t i = 0; i + 1 < o.value.size(); ++i) {
    n_lo += o.count[i];
    sum_lo += o.value[i] * o.count[i];
    const double n_hi = total - n_lo;
    const double between = n_lo * n_hi * std::pow(sum_lo / n_lo - (sum_all - sum_lo) / n_hi, 2);
    if (between > best) {
      best = between;
      split = static_cast<std::int64_t>(o.value[i]);
    }
  }
  return split;
}

void compute_errors(const Observed& o, CompoundPoissonFit& fit, double lam0, double lam1) {
  const auto& w = fit.model.weights;
  const std::size_t K = w.size() - 1;
  const double T = fit.model.bin_width;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  fit.weight_errors.assign(w.size(), nan);
  fit.background_rate_error = nan;
  fit.single_atom_rate_error = nan;

  // Free parameters: interior weights w_1..w_K, lam0 (if > 0), lam1.
  std::vector<int> free;
  for (std::size_t k = 1; k <= K; ++k)
    if (w[k] > 1e-7 && w[0] > 1e-7) free.push_back(static_cast<int>(k - 1));
  const bool lam0_free = lam0 > 1e-9;
  if (lam0_free) free.push_back(static_cast<int>(K));
  if (!fit.degenerate) free.push_back(static_cast<int>(K + 1));
  if (free.empty()) return;

  Eigen::VectorXd theta(static_cast<Eigen::Index>(K + 2));
  for (std::size_t k = 1; k <= K; ++k) theta[static_cast<Eigen::Index>(k - 1)] = w[k];
  theta[static_cast<Eigen::Index>(K)] = lam0;
  theta[static_cast<Eigen::Index>(K + 1)] = lam1;
  auto grad_at = [&](const Eigen::VectorXd& th) {
    std::vector<double> ww(K + 1);
    double rest = 0;
    for (std::size_t k = 1; k <= K; ++k) {
      ww[k] = th[static_cast<Eigen::Index>(k - 1)];
      rest += ww[k];
    }
    ww[0] = 1 - rest;
    return mixture_gradient(o, ww, th[static_cast<Eigen::Index>(K)], th[static_cast<Eigen::Index>(K + 1)]);
  };

  const auto m = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd hess(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const int j = free[static_cast<std::size_t>(a)];
    const double h = 1e-5 * std::max(std::abs(theta[j]), 1e-3);
    Eigen::VectorXd up = theta, dn = theta;
    up[j] += h;
    dn[j] -= h;
    const Eigen::VectorXd gu = grad_at(up), gd = grad_at(dn);
    for (Eigen::Index b = 0; b < m; ++b)
      hess(b, a) = (gu[free[static_cast<std::size_t>(b)]] - gd[free[static_cast<std::size_t>(b)]]) / (2 * h);
  }
  const Eigen::MatrixXd info = -0.5 * (hess + hess.transpose());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return;
  const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(m, m));

  double w0_var = 0;
  bool any_weight = false;
  for (Eigen::Index a = 0; a < m; ++a) {
    const int j = free[static_cast<std::size_t>(a)];
    const double se = std::sqrt(std::max(cov(a, a), 0.0));
    if (j < static_cast<int>(K)) {
      fit.weight_errors[static_cast<std::size_t>(j) + 1] = se;
      any_weight = true;
      for (Eigen::Index b = 0; b < m; ++b)
        if (free[static_cast<std::size_t>(b)] < static_cast<int>(K)) w0_var += cov(a, b);
    } else if (j == static_cast<int>(K)) {
      fit.background_rate_error = se / T;
    } else {
      fit.single_atom_rate_error = se / T;
    }
  }
  if (any_weight) fit.weight_errors[0] = std::sqrt(std::max(w0_var, 0.0));
  for (std::size_t k = 0; k <= K; ++k)
    if (std::isnan(fit.weight_errors[k]) && (w[k] <= 1e-7 || w[k] >= 1 - 1e-7))
      fit.weight_errors[k] = 0;  // on the boundary of the simplex
}

}  // namespace

CompoundPoissonFit fit_compound_poisson(const CountHistogram& histogram, int k_max,
                                        double bin_width) {
  if (k_max < 1) throw DomainError("fit_compound_poisson: k_max must be >= 1");
  if (!(bin_width > 0)) throw DomainError("fit_compound_poisson: bin_width must be > 0");
  const Observed o = compress(histogram);
  if (o.value.size() < 2) throw DomainError("fit_compound_poisson: histogram needs two distinct values");
  const auto K = static_cast<std::size_t>(k_max);

  // Deterministic initialization from a two-class split of the histogram.
  const auto split = static_cast<double>(otsu_split(o));
  double n_lo = 0, s_lo = 0, n_hi = 0, s_hi = 0;
  for (std::size_t i = 0; i < o.value.size(); ++i) {
    if (o.value[i] <= split) {
      n_lo += o.count[i];
      s_lo += o.count[i] * o.value[i];
    } else {
      n_hi += o.count[i];
      s_hi += o.count[i] * o.value[i];
    }
  }
  double lam0 = s_lo / n_lo;
  double lam1 = std::max(s_hi / n_hi - lam0, 1e-3);
  std::vector<double> w(K + 1, 0.0);
  w[0] = n_lo / o.total;
  w[1] = n_hi / o.total;
  for (std::size_t k = 2; k <= K; ++k) w[k] = 1e-3;
  {
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= sum;
  }

  CompoundPoissonFit fit;
  fit.model.bin_width = bin_width;
  const int max_iter = 20000;
  double ll = mixture_loglik(o, w, lam0, lam1);
  std::vector<double> resp(K + 1);
  bool converged = false;
  int it = 0;
  for (; it < max_iter; ++it) {
    // E step accumulators.
    std::vector<double> mass(K + 1, 0.0);
    std::vector<std::vector<double>> r(o.value.size(), std::vector<double>(K + 1));
    for (std::size_t i = 0; i < o.value.size(); ++i) {
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k <= K; ++k) {
        resp[k] = w[k] > 0 ? std::log(w[k]) + log_poisson(o.value[i], lam0 + static_cast<double>(k) * lam1)
                           : -std::numeric_limits<double>::infinity();
        top = std::max(top, resp[k]);
      }
      double z = 0;
      for (std::size_t k = 0; k <= K; ++k) z += (resp[k] = std::exp(resp[k] - top));
      for (std::size_t k = 0; k <= K; ++k) {
        r[i][k] = resp[k] / z;
        mass[k] += o.count[i] * r[i][k];
      }
    }
    for (std::size_t k = 0; k <= K; ++k) w[k] = mass[k] / o.total;

    // M step for the means: Newton iterations on a concave objective.
    const bool update_lam1 = (o.total - mass[0]) > 1e-9 * o.total;
    for (int newton = 0; newton < 20; ++newton) {
      double g0 = 0, g1 = 0, h00 = 0, h01 = 0, h11 = 0;
      for (std::size_t i = 0; i < o.value.size(); ++i) {
        for (std::size_t k = 0; k <= K; ++k) {
          const double c = o.count[i] * r[i][k];
          if (c <= 0) continue;
          const double kk = static_cast<double>(k);
          const double mu = lam0 + kk * lam1;
          const double x = o.value[i];
          g0 += c * (x / mu - 1);
          g1 += c * kk * (x / mu - 1);
          const double curv = c * x / (mu * mu);
          h00 += curv;
          h01 += curv * kk;
          h11 += curv * kk * kk;
        }
      }
      double d0, d1;
      if (update_lam1) {
        const double det = h00 * h11 - h01 * h01;
        if (!(det > 0)) break;
        d0 = (h11 * g0 - h01 * g1) / det;
        d1 = (h00 * g1 - h01 * g0) / det;
      } else {
        if (!(h00 > 0)) break;
        d0 = g0 / h00;
        d1 = 0;
      }
      double step = 1;
      while (step > 1e-12 && (lam0 + step * d0 < 0 || lam1 + step * d1 <= 0)) step /= 2;
      lam0 = std::max(lam0 + step * d0, 0.0);
      lam1 += step * d1;
      if (std::abs(d0) < 1e-12 * (1 + lam0) && std::abs(d1) < 1e-12 * (1 + lam1)) break;
    }

    const double next = mixture_loglik(o, w, lam0, lam1);
    const double change = next - ll;
    ll = next;
    if (std::abs(change) < 1e-10 * std::max(1.0, std::abs(ll)) && it > 2) {
      converged = true;
      break;
    }
  }
  fit.iterations = it;
  fit.model.weights = w;
  fit.model.background_rate = lam0 / bin_width;
  fit.model.single_atom_rate = lam1 / bin_width;
  fit.log_likelihood = ll;
  if (!converged) throw FitError("fit_compound_poisson: EM did not converge", fit);

  // Prefer the single-component law unless the mixture pays for its
  // additional parameters (BIC).
  double mean = 0;
  for (std::size_t i = 0; i < o.value.size(); ++i) mean += o.value[i] * o.count[i];
  mean /= o.total;
  const std::vector<double> single = [&] {
    std::vector<double> s(K + 1, 0.0);
    s[0] = 1;
    return s;
  }();
  const double ll_single = mixture_loglik(o, single, mean, lam1);
  const double extra_params = static_cast<double>(K) + 1;
  if (2 * (ll - ll_single) <= extra_params * std::log(o.total)) {
    fit.degenerate = true;
    fit.model.weights = single;
    fit.model.background_rate = mean / bin_width;
    fit.log_likelihood = ll_single;
    lam0 = mean;
  }
  compute_errors(o, fit, lam0, lam1);
  return fit;
}

ThresholdChoice atom_threshold(double background_rate, double single_atom_rate,
                               double bin_width) {
  if (!(single_atom_rate > 0))
    throw DomainError("atom_threshold: single-atom rate must be > 0 (populations indistinguishable)");
  if (!(background_rate >= 0) || !(bin_width > 0))
    throw DomainError("atom_threshold: invalid background rate or bin width");
  const double lam0 = background_rate * bin_width;
  const double lam1 = (background_rate + single_atom_rate) * bin_width;
  const boost::math::poisson_distribution<double> one(lam1);
  const auto upper = static_cast<std::int64_t>(std::ceil(lam1 + 10 * std::sqrt(lam1) + 10));
  ThresholdChoice best;
  best.false_positive = 1;
  best.false_negative = 1;
  for (std::int64_t theta = 0; theta <= upper; ++theta) {
    const auto x = static_cast<double>(theta);
    const double fp = lam0 > 0
                          ? cdf(complement(boost::math::poisson_distribution<double>(lam0), x))
                          : 0.0;
    const double fn = cdf(one, x);
    if (fp + fn < best.total_error()) {
      best.threshold = theta;
      best.false_positive = fp;
      best.false_negative = fn;
    }
  }
  best.overlap_warning = best.total_error() > 0.25;
  return best;
}

std::vector<double> detect_loading(const CountTrace& trace, std::int64_t threshold,
                                   int n_consecutive) {
  if (n_consecutive < 1) throw DomainError("detect_loading: n_consecutive must be >= 1");
  std::vector<double> detections;
  bool armed = true;
  int run = 0;
  for (std::size_t i = 0; i < trace.counts.size(); ++i) {
    if (trace.counts[i] > threshold) {
      ++run;
      if (armed && run == n_consecutive) {
        detections.push_back(trace.start_time + static_cast<double>(i + 1) * trace.bin_width);
        armed = false;
      }
    } else {
      run = 0;
      armed = true;
    }
  }
  return detections;
}

DwellEstimate dwell_lifetime(const std::vector<double>& complete,
                             const std::vector<double>& censored) {
  if (complete.size() < 30) throw DomainError("dwell_lifetime: fewer than 30 complete dwells");
  const double exposure = std::accumulate(complete.begin(), complete.end(), 0.0) +
                          std::accumulate(censored.begin(), censored.end(), 0.0);
  const double n = static_cast<double>(complete.size());
  DwellEstimate est;
  est.lifetime = exposure / n;
  const boost::math::chi_squared_distribution<double> chi2(2 * n);
  est.ci_low = 2 * exposure / quantile(chi2, 0.975);
  est.ci_high = 2 * exposure / quantile(chi2, 0.025);
  est.complete_dwells = complete.size();
  est.censored_dwells = censored.size();
  return est;
}

DwellEstimate dwell_lifetime(const OccupancyPath& path) {
  std::vector<double> complete, censored;
  std::optional<double> start;
  bool start_censored = false;
  for (std::size_t i = 0; i < path.times.size(); ++i) {
    const bool occupied = path.levels[i] > 0;
    if (occupied && !start) {
      start = path.times[i];
      start_censored = path.times[i] == 0;
    } else if (!occupied && start) {
      (start_censored ? censored : complete).push_back(path.times[i] - *start);
      start.reset();
    }
  }
  if (start) censored.push_back(path.duration - *start);
  return dwell_lifetime(complete, censored);
}

DwellEstimate dwell_lifetime(const CountTrace& trace, std::int64_t threshold) {
  std::vector<double> complete, censored;
  std::size_t run = 0;
  bool run_from_start = false;
  for (std::size_t i = 0; i < trace.counts.size(); ++i) {
    if (trace.counts[i] > threshold) {
      if (run == 0) run_from_start = i == 0;
      ++run;
    } else if (run > 0) {
      const double d = static_cast<double>(run) * trace.bin_width;
      (run_from_start ? censored : complete).push_back(d);
      run = 0;
    }
  }
  if (run > 0) censored.push_back(static_cast<double>(run) * trace.bin_width);
  return dwell_lifetime(complete, censored);
}

}  // namespace tweezer
