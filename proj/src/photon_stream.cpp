#include "tweezer/photon_stream.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "tweezer/errors.hpp"
#include "tweezer/parallel.hpp"
#include "tweezer/random.hpp"

namespace tweezer {

void DetectorModel::validate() const {
  if (!(efficiency >= 0 && efficiency <= 1)) throw ConfigError("detector: efficiency must be in [0, 1]");
  if (!(dark_rate >= 0)) throw ConfigError("detector: dark_rate must be >= 0");
  if (!(time_jitter >= 0)) throw ConfigError("detector: time_jitter must be >= 0");
}

StreamTiming StreamTiming::from_chain(const PulseChain& chain, double pulse_period) {
  return {pulse_period, chain.detection_open_time, chain.detection_window};
}

void StreamTiming::validate() const {
  if (!(pulse_period > 0)) throw ConfigError("stream timing: pulse_period must be > 0");
  if (!(gate_open >= 0) || !(gate_window > 0) || gate_open + gate_window > pulse_period)
    throw ConfigError("stream timing: detection gate must lie inside the pulse period");
}

namespace {

constexpr std::uint64_t kBlockPulses = 1ULL << 20;

std::int64_t to_ps(double t) { return std::llround(t * 1e12); }

double gaussian(Rng& rng) {
  // Box-Muller, so that streams do not depend on the library's normal sampler.
  const double u1 = 1 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
}

std::size_t pick(Rng& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

}  // namespace

std::array<TimestampStream, 2> generate_streams(const EmissionStatistics& stats,
                                                const StreamTiming& timing,
                                                std::uint64_t n_pulses,
                                                double collection_efficiency,
                                                const std::array<DetectorModel, 2>& detectors,
                                                double splitter_ratio, std::uint64_t seed,
                                                unsigned jobs) {
  timing.validate();
  for (const auto& d : detectors) d.validate();
  if (n_pulses < 1) throw DomainError("generate_streams: n_pulses must be >= 1");
  if (!(collection_efficiency >= 0 && collection_efficiency <= 1))
    throw DomainError("generate_streams: collection_efficiency must be in [0, 1]");
  if (!(splitter_ratio >= 0 && splitter_ratio <= 1))
    throw DomainError("generate_streams: splitter_ratio must be in [0, 1]");
  const double p1 = stats.p1, p2 = stats.p2plus;
  if (p1 < 0 || p2 < 0 || p1 + p2 > 1 + 1e-12)
    throw DomainError("generate_streams: invalid emission probabilities");
  if (p1 > 0 && stats.single_times.empty())
    throw DomainError("generate_streams: no single-emission time samples");
  if (p2 > 0 && stats.pair_times.empty())
    throw DomainError("generate_streams: no two-emission time samples");

  const double a0 = collection_efficiency * splitter_ratio * detectors[0].efficiency;
  const double a1 = collection_efficiency * (1 - splitter_ratio) * detectors[1].efficiency;
  const double a = a0 + a1;
  const double any2 = 1 - (1 - a) * (1 - a);
  const double c = p1 * a + p2 * any2;  // P(pulse yields >= 1 signal click)
  const std::int64_t period_ps = to_ps(timing.pulse_period);
  const std::uint64_t n_blocks = (n_pulses + kBlockPulses - 1) / kBlockPulses;

  struct Block {
    std::array<std::vector<std::int64_t>, 2> t;
  };
  std::vector<Block> blocks(n_blocks);
  parallel_for(n_blocks, jobs, [&](std::size_t b) {
    Rng rng = make_rng(seed, b);
    auto& out = blocks[b].t;
    const std::uint64_t first = b * kBlockPulses;
    const std::uint64_t last = std::min(n_pulses, first + kBlockPulses);

    auto emit = [&](std::uint64_t pulse, double t) {
      const int det = uniform01(rng) * a < a0 ? 0 : 1;
      const double jitter = detectors[det].time_jitter * gaussian(rng);
      out[det].push_back(static_cast<std::int64_t>(pulse) * period_ps + to_ps(t + jitter));
    };

    if (c > 0) {
      const double log_miss = std::log1p(-c);
      double k = static_cast<double>(first) - 1;
      while (true) {
        const double skip = c >= 1 ? 0.0 : std::floor(std::log1p(-uniform01(rng)) / log_miss);
        k += 1 + skip;
        if (k >= static_cast<double>(last)) break;
        const auto pulse = static_cast<std::uint64_t>(k);
        if (uniform01(rng) * c < p1 * a) {
          emit(pulse, stats.single_times[pick(rng, stats.single_times.size())]);
        } else {
          const auto& pair = stats.pair_times[pick(rng, stats.pair_times.size())];
          // Detection pattern conditioned on at least one click:
          // [0, a^2) both, [a^2, a) first only, [a, any2) second only.
          const double u = uniform01(rng) * any2;
          const bool first_seen = u < a;
          const bool second_seen = u < a * a || u >= a;
          if (first_seen) emit(pulse, pair[0]);
          if (second_seen) emit(pulse, pair[1]);
        }
      }
    }
    for (int det = 0; det < 2; ++det) {
      const double mean = detectors[det].dark_rate * timing.pulse_period *
                          static_cast<double>(last - first);
      if (mean <= 0) continue;
      std::poisson_distribution<std::int64_t> poisson(mean);
      const std::int64_t n = poisson(rng);
      for (std::int64_t i = 0; i < n; ++i) {
        const std::uint64_t pulse = first + pick(rng, last - first);
        const double t = timing.gate_open + uniform01(rng) * timing.gate_window;
        out[det].push_back(static_cast<std::int64_t>(pulse) * period_ps + to_ps(t));
      }
    }
    for (auto& v : out) std::sort(v.begin(), v.end());
  });

  std::array<TimestampStream, 2> streams;
  for (int det = 0; det < 2; ++det) {
    auto& s = streams[det];
    s.detector_id = static_cast<std::uint8_t>(det);
    std::size_t total = 0;
    for (const auto& b : blocks) total += b.t[det].size();
    s.times_ps.reserve(total);
    for (const auto& b : blocks) s.times_ps.insert(s.times_ps.end(), b.t[det].begin(), b.t[det].end());
    for (std::size_t i = 1; i < s.times_ps.size(); ++i)
      if (s.times_ps[i] <= s.times_ps[i - 1]) s.times_ps[i] = s.times_ps[i - 1] + 1;
  }
  return streams;
}

double G2Histogram::delay(std::size_t i) const {
  return static_cast<double>(static_cast<std::int64_t>(i) - half_bins) * bin_width();
}

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

G2Histogram empty_histogram(double bin_width, double range) {
  if (!(bin_width > 0) || !(range > 0)) throw DomainError("cross_correlate: bin_width and range must be > 0");
  G2Histogram h;
  h.bin_width_ps = to_ps(bin_width);
  if (h.bin_width_ps < 1) throw DomainError("cross_correlate: bin_width below 1 ps");
  h.half_bins = to_ps(range) / h.bin_width_ps;
  h.counts.assign(static_cast<std::size_t>(2 * h.half_bins + 1), 0);
  return h;
}

// Bin j with (j - 1/2) w <= delay < (j + 1/2) w.
std::int64_t bin_of(std::int64_t delay, std::int64_t w) { return floor_div(2 * delay + w, 2 * w); }

void check_streams(const TimestampStream& s1, const TimestampStream& s2) {
  if (s1.times_ps.empty() || s2.times_ps.empty())
    throw DomainError("cross_correlate: streams must be non-empty");
}

void finish(G2Histogram& h) {
  h.values.assign(h.counts.begin(), h.counts.end());
  h.normalization = 1;
}

}  // namespace

G2Histogram cross_correlate(const TimestampStream& s1, const TimestampStream& s2,
                            double bin_width, double range) {
  check_streams(s1, s2);
  G2Histogram h = empty_histogram(bin_width, range);
  const std::int64_t w = h.bin_width_ps, J = h.half_bins;
  const std::int64_t reach = (J + 1) * w;
  const auto& a = s1.times_ps;
  const auto& b = s2.times_ps;
  if (a.back() + reach < b.front() || b.back() + reach < a.front())
    throw DomainError("cross_correlate: streams do not overlap within the delay range");
  std::size_t lo = 0;
  for (const std::int64_t t1 : a) {
    while (lo < b.size() && b[lo] < t1 - reach) ++lo;
    for (std::size_t k = lo; k < b.size() && b[k] <= t1 + reach; ++k) {
      const std::int64_t j = bin_of(b[k] - t1, w);
      if (j >= -J && j <= J) ++h.counts[static_cast<std::size_t>(j + J)];
    }
  }
  finish(h);
  return h;
}

G2Histogram cross_correlate_brute_force(const TimestampStream& s1, const TimestampStream& s2,
                                        double bin_width, double range) {
  check_streams(s1, s2);
  G2Histogram h = empty_histogram(bin_width, range);
  for (const std::int64_t t1 : s1.times_ps)
    for (const std::int64_t t2 : s2.times_ps) {
      const std::int64_t j = bin_of(t2 - t1, h.bin_width_ps);
      if (j >= -h.half_bins && j <= h.half_bins) ++h.counts[static_cast<std::size_t>(j + h.half_bins)];
    }
  finish(h);
  return h;
}

std::map<int, double> peak_areas(const G2Histogram& hist, double period, double half_width) {
  if (!(period > 0) || !(half_width > 0)) throw DomainError("peak_areas: period and half_width must be > 0");
  if (2 * half_width > period * (1 + 1e-12)) throw ConfigError("peak_areas: peak windows overlap");
  const double w = static_cast<double>(hist.bin_width_ps);
  const double P = period * 1e12, h = half_width * 1e12;
  const double edge = (static_cast<double>(hist.half_bins) + 0.5) * w;
  const auto kmax = static_cast<int>(std::floor((edge - h) / P + 1e-9));
  if (kmax < 5) throw DomainError("peak_areas: delay range must cover 5 side peaks on each side");
  std::map<int, double> areas;
  for (int k = -kmax; k <= kmax; ++k) {
    const double lo = k * P - h, hi = k * P + h;
    const auto jlo = static_cast<std::int64_t>(std::floor(lo / w - 0.5));
    const auto jhi = static_cast<std::int64_t>(std::ceil(hi / w + 0.5));
    double area = 0;
    for (std::int64_t j = std::max(jlo, -hist.half_bins); j <= std::min(jhi, hist.half_bins); ++j) {
      const double b_lo = (static_cast<double>(j) - 0.5) * w, b_hi = b_lo + w;
      const double overlap = std::min(hi, b_hi) - std::max(lo, b_lo);
      if (overlap > 0) area += hist.values[hist.index_of(j)] * overlap / w;
    }
    areas[k] = area;
  }
  return areas;
}

TwoPhotonEstimate two_photon_probability(const std::map<int, double>& areas) {
  const auto zero = areas.find(0);
  if (zero == areas.end()) throw DomainError("two_photon_probability: no zero-delay peak");
  TwoPhotonEstimate est;
  double sum = 0;
  for (const auto& [k, a] : areas)
    if (k != 0) {
      sum += a;
      ++est.side_peaks;
    }
  if (est.side_peaks < 4) throw DomainError("two_photon_probability: need at least 4 side peaks");
  est.zero_area = zero->second;
  est.mean_side_area = sum / static_cast<double>(est.side_peaks);
  if (!(est.mean_side_area > 0)) throw ComputationError("two_photon_probability: zero side-peak area");
  const double A0 = est.zero_area, As = est.mean_side_area, n = static_cast<double>(est.side_peaks);
  est.value = 0.5 * A0 / As;
  est.error = 0.5 * std::sqrt(std::max(A0, 0.0) / (As * As) + A0 * A0 / (As * As * As * n));
  return est;
}

TwoPhotonEstimate two_photon_probability(const G2Histogram& hist, double period,
                                         double half_width) {
  return two_photon_probability(peak_areas(hist, period, half_width));
}

CorrectedEstimate background_correction(const TwoPhotonEstimate& raw, const AccidentalModel& m) {
  if (!(m.pulse_rate > 0) || !(m.total_time >= 0))
    throw DomainError("background_correction: pulse_rate must be > 0 and total_time >= 0");
  for (int i = 0; i < 2; ++i)
    if (!(m.dark_rate[i] >= 0) || !(m.signal_rate[i] >= 0))
      throw DomainError("background_correction: rates must be >= 0");
  if (!(raw.mean_side_area > 0)) throw ComputationError("background_correction: zero side-peak area");
  const double N = m.pulse_rate * m.total_time;
  const double s1 = m.signal_rate[0] / m.pulse_rate, s2 = m.signal_rate[1] / m.pulse_rate;
  const double d1 = m.dark_rate[0] / m.pulse_rate, d2 = m.dark_rate[1] / m.pulse_rate;
  CorrectedEstimate out;
  out.accidental_area = N * (s1 * d2 + d1 * s2 + d1 * d2);
  out.formula =
      "A_acc = N*(s1*d2 + d1*s2 + d1*d2); N = pulse_rate*total_time; s_i = signal_rate_i/pulse_rate; "
      "d_i = dark_rate_i/pulse_rate; P2 = (A0 - A_acc)/(2*mean_side_area)";
  double net = raw.zero_area - out.accidental_area;
  if (net < 0) {
    net = 0;
    out.clamped = true;
  }
  const double As = raw.mean_side_area, n = static_cast<double>(std::max<std::size_t>(raw.side_peaks, 1));
  out.value = 0.5 * net / As;
  out.error = 0.5 * std::sqrt(std::max(raw.zero_area, 0.0) / (As * As) + net * net / (As * As * As * n));
  return out;
}

G2Histogram normalize_histogram(const G2Histogram& hist, double period, double half_width) {
  const auto est = two_photon_probability(hist, period, half_width);
  const double scale = est.mean_side_area * hist.bin_width() / period;
  G2Histogram out = hist;
  for (auto& v : out.values) v /= scale;
  out.normalization *= scale;
  return out;
}

double PeakProfile::maximum() const {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

PeakProfile side_peak_profile(const G2Histogram& hist, double period, double half_width) {
  const auto areas = peak_areas(hist, period, half_width);
  const double w = static_cast<double>(hist.bin_width_ps);
  const double P = period * 1e12;
  const auto m = static_cast<std::int64_t>(std::floor(half_width * 1e12 / w));
  auto value_at = [&](double delay) {
    const double x = delay / w;  // fractional bin index
    const auto j0 = static_cast<std::int64_t>(std::floor(x));
    const double f = x - static_cast<double>(j0);
    const auto v = [&](std::int64_t j) {
      return (j < -hist.half_bins || j > hist.half_bins) ? 0.0 : hist.values[hist.index_of(j)];
    };
    return (1 - f) * v(j0) + f * v(j0 + 1);
  };
  PeakProfile prof;
  std::size_t n_side = 0;
  for (const auto& [k, a] : areas)
    if (k != 0) ++n_side;
  for (std::int64_t j = -m; j <= m; ++j) {
    double sum = 0;
    for (const auto& [k, a] : areas)
      if (k != 0) sum += value_at(k * P + static_cast<double>(j) * w);
    prof.offsets.push_back(static_cast<double>(j) * w * 1e-12);
    prof.values.push_back(sum / static_cast<double>(n_side));
  }
  return prof;
}

std::vector<double> predicted_g2(const EmissionTimeDistribution& dist, double zero_peak_scale,
                                 const G2Histogram& layout, double period) {
  if (dist.times.size() < 2) throw DomainError("predicted_g2: empty emission-time distribution");
  if (!(period > 0)) throw DomainError("predicted_g2: period must be > 0");
  const double dt = 0.1e-9;
  const double t0 = dist.times.front(), t1 = dist.times.back();
  const auto n = static_cast<std::size_t>(std::ceil((t1 - t0) / dt)) + 1;
  std::vector<double> f(n);
  std::size_t seg = 0;
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::min(t0 + static_cast<double>(i) * dt, t1);
    while (seg + 2 < dist.times.size() && dist.times[seg + 1] < t) ++seg;
    const double a = dist.times[seg], b = dist.times[seg + 1];
    const double w = b > a ? (t - a) / (b - a) : 0.0;
    f[i] = (1 - w) * dist.first_photon_density[seg] + w * dist.first_photon_density[seg + 1];
    total += f[i] * dt;
  }
  if (!(total > 0)) throw DomainError("predicted_g2: emission density integrates to zero");
  for (auto& x : f) x /= total;
  std::vector<double> corr(n, 0.0);  // corr[m] = int f(t) f(t + m dt) dt
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t i = 0; i + m < n; ++i) corr[m] += f[i] * f[i + m] * dt;

  std::vector<double> out(layout.counts.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double delay = layout.delay(i);
    const double k = std::round(delay / period);
    const double x = std::abs(delay - k * period) / dt;
    const auto m = static_cast<std::size_t>(x);
    double c = 0;
    if (m + 1 < n) c = (1 - (x - static_cast<double>(m))) * corr[m] + (x - static_cast<double>(m)) * corr[m + 1];
    out[i] = period * c * (k == 0 ? zero_peak_scale : 1.0);
  }
  return out;
}

namespace {

struct Event {
  std::int64_t t;
  std::uint8_t id;
};

std::vector<Event> merged(const std::array<TimestampStream, 2>& s) {
  std::vector<Event> ev;
  for (int d = 0; d < 2; ++d)
    for (const auto t : s[d].times_ps) {
      if (t < 0) throw DomainError("stream: negative timestamps cannot be serialized");
      ev.push_back({t, static_cast<std::uint8_t>(d)});
    }
  std::stable_sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  return ev;
}

std::array<TimestampStream, 2> split(const std::vector<Event>& ev) {
  std::array<TimestampStream, 2> s;
  s[0].detector_id = 0;
  s[1].detector_id = 1;
  for (const auto& e : ev) {
    if (e.id > 1) throw DomainError("stream: detector id must be 0 or 1");
    auto& v = s[e.id].times_ps;
    if (!v.empty() && e.t <= v.back()) throw DomainError("stream: timestamps not strictly increasing");
    v.push_back(e.t);
  }
  return s;
}

}  // namespace

void write_streams_binary(std::ostream& out, const std::array<TimestampStream, 2>& streams) {
  for (const auto& e : merged(streams)) {
    unsigned char rec[9];
    rec[0] = e.id;
    auto t = static_cast<std::uint64_t>(e.t);
    for (int i = 0; i < 8; ++i) rec[1 + i] = static_cast<unsigned char>((t >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(rec), sizeof rec);
  }
}

std::array<TimestampStream, 2> read_streams_binary(std::istream& in) {
  std::vector<Event> ev;
  unsigned char rec[9];
  while (in.read(reinterpret_cast<char*>(rec), sizeof rec)) {
    std::uint64_t t = 0;
    for (int i = 0; i < 8; ++i) t |= static_cast<std::uint64_t>(rec[1 + i]) << (8 * i);
    if (t > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
      throw DomainError("stream: timestamp out of range");
    ev.push_back({static_cast<std::int64_t>(t), rec[0]});
  }
  if (in.gcount() != 0) throw DomainError("stream: truncated binary record");
  return split(ev);
}

void write_streams_csv(std::ostream& out, const std::array<TimestampStream, 2>& streams) {
  out << "detector_id,time_ps\n";
  for (const auto& e : merged(streams)) out << static_cast<int>(e.id) << ',' << e.t << '\n';
}

std::array<TimestampStream, 2> read_streams_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "detector_id,time_ps")
    throw DomainError("stream csv: missing header 'detector_id,time_ps'");
  std::vector<Event> ev;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    int id = -1;
    char comma = 0;
    std::int64_t t = -1;
    if (!(row >> id >> comma >> t) || comma != ',' || id < 0 || id > 1 || t < 0)
      throw DomainError("stream csv: malformed row '" + line + "'");
    ev.push_back({t, static_cast<std::uint8_t>(id)});
  }
  std::stable_sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  return split(ev);
}

void write_histogram_csv(std::ostream& out, const G2Histogram& hist) {
  out << "delay_ns,counts,normalized\n";
  for (std::size_t i = 0; i < hist.counts.size(); ++i)
    out << hist.delay(i) * 1e9 << ',' << hist.counts[i] << ',' << hist.values[i] << '\n';
}

}  // namespace tweezer
