#pragma once

#include <span>
#include <string>
#include <vector>

#include "deftrace/waveform_model.hpp"

namespace deftrace {

struct Spectrum {
  std::vector<double> freqs;  // Hz, strictly increasing from 0
  std::vector<double> psd;    // one-sided density, unit^2/Hz
  double resolution = 0.0;    // grid spacing, Hz
  TimeSpan window_span;
};

// One identified oscillation mode (dq-domain frequency Delta f).
struct Mode {
  double freq = 0.0;
  double f_lo = 0.0;
  double f_hi = 0.0;
  double prominence_db = 0.0;

  double bandwidth() const { return f_hi - f_lo; }
};

// Welch averaged periodogram: periodic Hann taper, per-segment mean removal,
// one-sided density scaling so that the integral over frequency equals the
// signal variance.
Spectrum compute_psd(const SampleSeries& x, double segment_len, double overlap);

// Element-wise sum; all spectra must share one frequency grid.
Spectrum sum_spectra(std::span<const Spectrum> spectra);

struct ModeIdOptions {
  double min_prominence_db = 10.0;
  int max_modes = 5;
  double min_freq = 5.0;          // lower edge of the search range
  double max_freq = 0.0;          // 0: Nyquist
  double dynamic_range_db = 40.0; // peaks further below the strongest are ignored
  double min_band_power = 0.0;    // absolute floor on peak density x resolution
  double min_separation = 2.0;    // Hz; a peak must dominate this neighbourhood
  double band_halfwidth = 0.0;    // 0: default policy of mode_filter
};

// Peaks of the summed spectra standing at least `min_prominence_db` above
// the median floor of the search range, sorted by prominence, truncated to
// `max_modes`. Bands come from the mode_filter policy and are shrunk toward
// the peak centres until disjoint.
std::vector<Mode> identify_modes(std::span<const Spectrum> spectra, const ModeIdOptions& opt);

}  // namespace deftrace
