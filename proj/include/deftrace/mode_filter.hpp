#pragma once

#include <vector>

#include "deftrace/iir.hpp"
#include "deftrace/mode_id.hpp"
#include "deftrace/waveform_model.hpp"

namespace deftrace {

// Default analysis half-bandwidth around a mode: max(2 Hz, 0.1 f).
double default_halfwidth(double freq);

// Band for a mode at `freq` with `halfwidth` (0 selects the default). The
// band is clipped so that 0 < f_lo and f_hi < nyquist.
Mode make_mode(double freq, double halfwidth, double nyquist, double prominence_db = 0.0);

// Shrinks neighbouring bands toward their centres until no two overlap.
void make_bands_disjoint(std::vector<Mode>& modes);

struct BandpassOptions {
  int order = 4;  // analog prototype order
};

iir::Sos design_bandpass(const Mode& m, double fs, const BandpassOptions& opt = {});

// Zero-phase (forward-backward) Butterworth bandpass isolating mode `m`,
// followed by mean removal.
SampleSeries bandpass(const SampleSeries& x, const Mode& m, const BandpassOptions& opt = {});

// Seconds at each end of a filtered record dominated by edge transients:
// 3 / (f_hi - f_lo).
double edge_transient(const Mode& m);

// Part of `s` outside the edge-transient margins.
TimeSpan reliable_span(const TimeSpan& s, const Mode& m);

}  // namespace deftrace
