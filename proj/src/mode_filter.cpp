#include "deftrace/mode_filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "deftrace/error.hpp"

namespace deftrace {

namespace {
constexpr const char* kModule = "mode_filter";
}

double default_halfwidth(double freq) { return std::max(2.0, 0.1 * freq); }

Mode make_mode(double freq, double halfwidth, double nyquist, double prominence_db) {
  if (!(freq > 0.0) || !(freq < nyquist)) throw ConfigError(kModule, "mode frequency outside (0, fs/2)");
  double hw = halfwidth > 0.0 ? halfwidth : default_halfwidth(freq);
  const double lo_room = 0.9 * freq;
  const double hi_room = 0.9 * (nyquist - freq);
  return Mode{freq, freq - std::min(hw, lo_room), freq + std::min(hw, hi_room), prominence_db};
}

void make_bands_disjoint(std::vector<Mode>& modes) {
  std::vector<Mode*> by_freq;
  for (auto& m : modes) by_freq.push_back(&m);
  std::sort(by_freq.begin(), by_freq.end(), [](const Mode* a, const Mode* b) { return a->freq < b->freq; });
  for (std::size_t k = 0; k + 1 < by_freq.size(); ++k) {
    Mode& lo = *by_freq[k];
    Mode& hi = *by_freq[k + 1];
    const double up = lo.f_hi - lo.freq;
    const double down = hi.freq - hi.f_lo;
    const double room = 0.9 * (hi.freq - lo.freq);
    if (up + down > room) {
      const double scale = room / (up + down);
      lo.f_hi = lo.freq + up * scale;
      hi.f_lo = hi.freq - down * scale;
    }
  }
}

iir::Sos design_bandpass(const Mode& m, double fs, const BandpassOptions& opt) {
  if (!(m.f_lo > 0.0) || !(m.f_hi < fs / 2.0) || !(m.f_hi > m.f_lo)) {
    throw ConfigError(kModule, "band [" + std::to_string(m.f_lo) + ", " + std::to_string(m.f_hi) +
                                   "] Hz outside the Nyquist range");
  }
  return iir::butter_bandpass(opt.order, m.f_lo, m.f_hi, fs);
}

double edge_transient(const Mode& m) { return 3.0 / m.bandwidth(); }

TimeSpan reliable_span(const TimeSpan& s, const Mode& m) {
  const double e = edge_transient(m);
  return {s.start + e, s.end - e};
}

SampleSeries bandpass(const SampleSeries& x, const Mode& m, const BandpassOptions& opt) {
  const auto sos = design_bandpass(m, x.fs(), opt);
  if (x.duration() < 10.0 / m.bandwidth()) {
    throw InsufficientDataError(kModule, "series of " + std::to_string(x.duration()) +
                                             " s is too short for a " + std::to_string(m.bandwidth()) +
                                             " Hz wide band");
  }
  const auto pad = static_cast<std::size_t>(std::ceil(edge_transient(m) * x.fs()));
  auto y = iir::filtfilt(sos, x.values(), pad);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  for (double& v : y) v -= mean;
  return SampleSeries(std::move(y), x.fs(), x.t0());
}

}  // namespace deftrace
