#pragma once

#include <string>
#include <vector>

#include "deftrace/mode_id.hpp"
#include "deftrace/waveform_model.hpp"

namespace deftrace {

// Cumulative dissipative energy of one terminal for one mode.
struct DefTrace {
  SampleSeries w;
  std::string node;
  std::string element;
  Mode mode;
  TimeSpan reliable;  // span free of filter edge transients
};

struct SlopeEstimate {
  double wdot = 0.0;
  double std_error = 0.0;
  TimeSpan window;
};

struct SlopeSummary {
  SlopeEstimate summary;               // median slope over the analysis span
  std::vector<SlopeEstimate> windows;  // per-window fits
};

// Forward-difference accumulation
//   W[k+1] = W[k] + did[k] (dvq[k+1] - dvq[k]) - diq[k] (dvd[k+1] - dvd[k]),
// W[0] = 0. Inputs are the bandpass-filtered, detrended dq components.
SampleSeries accumulate_def(const SampleSeries& did, const SampleSeries& diq, const SampleSeries& dvd,
                            const SampleSeries& dvq);

// Least-squares line fits of w(t) over windows of `t_win` seconds, stride
// t_win/2, confined to `span`. With `ripple_freq` > 0 the fit also carries
// sinusoids at ripple_freq and 2 ripple_freq, so residual mode ripple does not
// leak into the slope.
std::vector<SlopeEstimate> window_slopes(const SampleSeries& w, double t_win, const TimeSpan& span,
                                         double ripple_freq = 0.0);

// Per-window fits over the reliable span of `trace`, with ripple terms at the
// mode frequency. t_win must cover at least 3 periods of the mode.
std::vector<SlopeEstimate> def_slope(const DefTrace& trace, double t_win);

// Median of the window slopes. The summary std_error combines the typical
// window fit error with the spread of window slopes.
SlopeEstimate summarize_slopes(const std::vector<SlopeEstimate>& windows);

SlopeSummary estimate_slope(const DefTrace& trace, double t_win);

}  // namespace deftrace
