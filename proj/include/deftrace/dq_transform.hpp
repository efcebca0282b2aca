#pragma once

#include <limits>

#include "deftrace/waveform_model.hpp"

namespace deftrace {

// Fixed synchronous reference frame: theta(t) = 2*pi*f0*(t - epoch) + theta0.
// One reference is shared by every terminal of an analysis.
struct ParkReference {
  double f0 = 60.0;
  double theta0 = 0.0;
  double epoch = 0.0;

  double angle(double t) const;
};

// d/q dynamic-phasor components of one three-phase quantity.
class DqSignal {
 public:
  DqSignal(SampleSeries d, SampleSeries q, ParkReference ref);

  const SampleSeries& d() const { return d_; }
  const SampleSeries& q() const { return q_; }
  const ParkReference& reference() const { return ref_; }
  double f0() const { return ref_.f0; }
  double theta0() const { return ref_.theta0; }

 private:
  SampleSeries d_, q_;
  ParkReference ref_;
};

// Wraps an angle into [-pi, pi).
double wrap_angle(double a);

// Amplitude-invariant Park transform, q lagging d by 90 degrees:
//   d = 2/3 [a cos(th) + b cos(th - 2pi/3) + c cos(th + 2pi/3)]
//   q = -2/3 [a sin(th) + b sin(th - 2pi/3) + c sin(th + 2pi/3)]
// A balanced positive-sequence set of peak A aligned with the reference maps
// to d = A, q = 0.
DqSignal park_transform(const ThreePhaseSignal& x, const ParkReference& ref);
// Convenience form anchoring the reference at x.t0().
DqSignal park_transform(const ThreePhaseSignal& x, double f0, double theta0);

ThreePhaseSignal inverse_park(const DqSignal& x);

// Phase of the fundamental positive-sequence phasor of `v`, taken from a DFT
// at exactly f0 over the largest whole number of cycles within `span` seconds
// from the start of the record. The returned reference has epoch = v.t0().
ParkReference estimate_reference(const ThreePhaseSignal& v, double f0, double span);
double estimate_reference_phase(const ThreePhaseSignal& v, double f0, double span);

struct Detrend {
  enum class Kind { Mean, Lowpass } kind = Kind::Mean;
  double fc = 0.0;  // lowpass cutoff, Hz

  static Detrend mean() { return {}; }
  static Detrend lowpass(double fc) { return {Kind::Lowpass, fc}; }
};

// Mean mode removes the window mean; lowpass mode subtracts a zero-phase
// Butterworth low-pass trend. The cutoff must stay below `lowest_mode_freq`.
SampleSeries detrend(const SampleSeries& x, const Detrend& mode,
                     double lowest_mode_freq = std::numeric_limits<double>::infinity());

}  // namespace deftrace
