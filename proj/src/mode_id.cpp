#include "deftrace/mode_id.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>

#include "deftrace/error.hpp"
#include "deftrace/mode_filter.hpp"

namespace deftrace {

namespace {

constexpr const char* kModule = "mode_id";

// FFTW planning is not thread-safe; execution with new-array calls is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

std::vector<double> periodic_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), mid));
  }
  return m;
}

}  // namespace

Spectrum compute_psd(const SampleSeries& x, double segment_len, double overlap) {
  if (overlap < 0.0 || overlap >= 1.0) throw ConfigError(kModule, "overlap must be in [0, 1)");
  if (!(segment_len > 0.0)) throw ConfigError(kModule, "segment length must be > 0");
  const auto nseg = static_cast<std::size_t>(std::llround(segment_len * x.fs()));
  if (nseg > x.size()) {
    throw ConfigError(kModule, "PSD segment of " + std::to_string(segment_len) +
                                   " s is longer than the series (" + std::to_string(x.duration()) + " s)");
  }
  if (nseg < 8) throw ConfigError(kModule, "PSD segment shorter than 8 samples");
  const auto noverlap = static_cast<std::size_t>(std::floor(static_cast<double>(nseg) * overlap));
  const std::size_t hop = std::max<std::size_t>(1, nseg - noverlap);
  const std::size_t nfreq = nseg / 2 + 1;

  const auto window = periodic_hann(nseg);
  double u = 0.0;
  for (double w : window) u += w * w;

  std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * nseg)));
  std::unique_ptr<fftw_complex, FftwFree> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nfreq)));
  std::unique_ptr<fftw_plan_s, PlanDeleter> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(nseg), in.get(), out.get(), FFTW_ESTIMATE));
  }

  std::vector<double> acc(nfreq, 0.0);
  std::size_t count = 0;
  const auto v = x.values();
  for (std::size_t start = 0; start + nseg <= x.size(); start += hop) {
    double mean = 0.0;
    for (std::size_t i = 0; i < nseg; ++i) mean += v[start + i];
    mean /= static_cast<double>(nseg);
    for (std::size_t i = 0; i < nseg; ++i) in.get()[i] = (v[start + i] - mean) * window[i];
    fftw_execute(plan.get());
    for (std::size_t k = 0; k < nfreq; ++k) {
      const double re = out.get()[k][0];
      const double im = out.get()[k][1];
      double p = (re * re + im * im) / (x.fs() * u);
      if (k != 0 && !(nseg % 2 == 0 && k == nseg / 2)) p *= 2.0;
      acc[k] += p;
    }
    ++count;
  }

  Spectrum s;
  s.resolution = x.fs() / static_cast<double>(nseg);
  s.freqs.resize(nfreq);
  s.psd.resize(nfreq);
  for (std::size_t k = 0; k < nfreq; ++k) {
    s.freqs[k] = static_cast<double>(k) * s.resolution;
    s.psd[k] = acc[k] / static_cast<double>(count);
  }
  s.window_span = x.span();
  return s;
}

Spectrum sum_spectra(std::span<const Spectrum> spectra) {
  if (spectra.empty()) throw ConfigError(kModule, "no spectra to aggregate");
  Spectrum total = spectra.front();
  for (std::size_t s = 1; s < spectra.size(); ++s) {
    const auto& sp = spectra[s];
    if (sp.freqs.size() != total.freqs.size() ||
        std::abs(sp.resolution - total.resolution) > 1e-12 * total.resolution) {
      throw AlignmentError(kModule, "spectra do not share one frequency grid");
    }
    for (std::size_t k = 0; k < total.psd.size(); ++k) total.psd[k] += sp.psd[k];
  }
  return total;
}

std::vector<Mode> identify_modes(std::span<const Spectrum> spectra, const ModeIdOptions& opt) {
  if (!(opt.min_prominence_db > 0.0)) throw ConfigError(kModule, "min_prominence_db must be > 0");
  if (opt.max_modes < 1) throw ConfigError(kModule, "max_modes must be >= 1");
  if (spectra.empty()) return {};
  const Spectrum agg = sum_spectra(spectra);
  const double res = agg.resolution;
  const double nyquist = agg.freqs.back();
  const double fmax = opt.max_freq > 0.0 ? std::min(opt.max_freq, nyquist) : nyquist;

  // Search range excludes DC and the Nyquist bin.
  std::size_t k_lo = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(opt.min_freq / res - 1e-9)));
  std::size_t k_hi = std::min(agg.psd.size() - 1, static_cast<std::size_t>(std::floor(fmax / res + 1e-9)));
  if (k_hi <= k_lo + 2) return {};

  const std::vector<double> band(agg.psd.begin() + static_cast<std::ptrdiff_t>(k_lo),
                                 agg.psd.begin() + static_cast<std::ptrdiff_t>(k_hi));
  const double strongest = *std::max_element(band.begin(), band.end());
  if (!(strongest > 0.0)) return {};
  double floor = median(band);
  if (!(floor > 0.0)) floor = std::numeric_limits<double>::min();
  const double range_floor = strongest * std::pow(10.0, -opt.dynamic_range_db / 10.0);

  const auto sep = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(opt.min_separation / res)));
  std::vector<Mode> found;
  for (std::size_t k = k_lo; k < k_hi; ++k) {
    const double p = agg.psd[k];
    if (p < range_floor || p * res < opt.min_band_power) continue;
    const double prom = 10.0 * std::log10(p / floor);
    if (prom < opt.min_prominence_db) continue;
    bool is_peak = true;
    const std::size_t a = k >= sep ? k - sep : 0;
    const std::size_t b = std::min(agg.psd.size() - 1, k + sep);
    for (std::size_t j = a; j <= b && is_peak; ++j) {
      if (j == k) continue;
      // ties resolve to the lowest-frequency bin
      if (agg.psd[j] > p || (agg.psd[j] == p && j < k)) is_peak = false;
    }
    if (!is_peak) continue;
    found.push_back(make_mode(agg.freqs[k], opt.band_halfwidth, nyquist, prom));
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const Mode& x, const Mode& y) { return x.prominence_db > y.prominence_db; });
  if (found.size() > static_cast<std::size_t>(opt.max_modes)) found.resize(static_cast<std::size_t>(opt.max_modes));
  make_bands_disjoint(found);
  return found;
}

}  // namespace deftrace
