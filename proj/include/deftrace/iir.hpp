#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace deftrace::iir {

// Second-order section, a0 normalised to 1:
//   H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

using Sos = std::vector<Biquad>;

// Digital Butterworth designs via the bilinear transform with prewarping.
// `order` is the order of the analog lowpass prototype, so a bandpass design
// has 2*order poles (order sections).
Sos butter_lowpass(int order, double fc, double fs);
Sos butter_bandpass(int order, double f_lo, double f_hi, double fs);

std::complex<double> response(const Sos& sos, double f, double fs);

// Causal cascade, direct form II transposed. `zi` holds two states per section.
std::vector<double> filter(const Sos& sos, std::span<const double> x, std::vector<double>* zi = nullptr);

// Steady-state section states for a unit step input.
std::vector<double> step_initial_state(const Sos& sos);

// Forward-backward application with odd-symmetric extension of `padlen`
// samples at each end and steady-state initial conditions. Zero phase,
// magnitude |H|^2.
std::vector<double> filtfilt(const Sos& sos, std::span<const double> x, std::size_t padlen);

}  // namespace deftrace::iir
