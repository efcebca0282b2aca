#include "deftrace/iir.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "deftrace/error.hpp"

namespace deftrace::iir {

namespace {

using cplx = std::complex<double>;
constexpr const char* kModule = "mode_filter";

std::vector<cplx> butter_prototype(int order) {
  std::vector<cplx> poles;
  for (int k = 0; k < order; ++k) {
    double ang = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
    poles.push_back(std::polar(1.0, ang));
  }
  return poles;
}

cplx bilinear(cplx s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

double prewarp(double f, double fs) { return 2.0 * fs * std::tan(std::numbers::pi * f / fs); }

// Groups digital poles into sections: each complex-conjugate pair becomes one
// denominator, leftover real poles are paired in sorted order.
Sos pole_sections(std::vector<cplx> zpoles) {
  Sos sos;
  std::vector<double> real;
  for (const auto& z : zpoles) {
    if (std::abs(z.imag()) <= 1e-12) real.push_back(z.real());
    else if (z.imag() > 0.0) {
      Biquad bq;
      bq.a1 = -2.0 * z.real();
      bq.a2 = std::norm(z);
      sos.push_back(bq);
    }
  }
  std::sort(real.begin(), real.end());
  for (std::size_t k = 0; k + 1 < real.size(); k += 2) {
    Biquad bq;
    bq.a1 = -(real[k] + real[k + 1]);
    bq.a2 = real[k] * real[k + 1];
    sos.push_back(bq);
  }
  if (real.size() % 2 == 1) {
    Biquad bq;
    bq.a1 = -real.back();
    bq.a2 = 0.0;
    sos.push_back(bq);
  }
  return sos;
}

void normalise_gain(Sos& sos, double f, double fs) {
  double g = std::abs(response(sos, f, fs));
  double per = std::pow(1.0 / g, 1.0 / static_cast<double>(sos.size()));
  for (auto& s : sos) {
    s.b0 *= per;
    s.b1 *= per;
    s.b2 *= per;
  }
}

}  // namespace

Sos butter_lowpass(int order, double fc, double fs) {
  if (order < 1) throw ConfigError(kModule, "filter order must be >= 1");
  if (!(fc > 0.0) || !(fc < fs / 2.0)) throw ConfigError(kModule, "lowpass cutoff outside (0, fs/2)");
  const double wc = prewarp(fc, fs);
  std::vector<cplx> zp;
  for (const auto& p : butter_prototype(order)) zp.push_back(bilinear(wc * p, fs));
  Sos sos = pole_sections(std::move(zp));
  for (auto& s : sos) {
    if (s.a2 == 0.0) {
      s.b0 = 1.0;
      s.b1 = 1.0;
      s.b2 = 0.0;
    } else {
      s.b0 = 1.0;
      s.b1 = 2.0;
      s.b2 = 1.0;
    }
  }
  normalise_gain(sos, 0.0, fs);
  return sos;
}

Sos butter_bandpass(int order, double f_lo, double f_hi, double fs) {
  if (order < 1) throw ConfigError(kModule, "filter order must be >= 1");
  if (!(f_lo > 0.0) || !(f_hi > f_lo) || !(f_hi < fs / 2.0)) {
    throw ConfigError(kModule, "bandpass edges must satisfy 0 < f_lo < f_hi < fs/2");
  }
  const double wl = prewarp(f_lo, fs);
  const double wh = prewarp(f_hi, fs);
  const double bw = wh - wl;
  const double w0sq = wl * wh;
  std::vector<cplx> zp;
  for (const auto& p : butter_prototype(order)) {
    // s^2 - p*bw*s + w0^2 = 0
    cplx half = p * bw / 2.0;
    cplx disc = std::sqrt(half * half - w0sq);
    zp.push_back(bilinear(half + disc, fs));
    zp.push_back(bilinear(half - disc, fs));
  }
  Sos sos = pole_sections(std::move(zp));
  for (auto& s : sos) {
    // one zero at z = 1 and one at z = -1 per section
    s.b0 = 1.0;
    s.b1 = 0.0;
    s.b2 = -1.0;
  }
  const double f_center = fs / std::numbers::pi * std::atan(std::sqrt(w0sq) / (2.0 * fs));
  normalise_gain(sos, f_center, fs);
  return sos;
}

std::complex<double> response(const Sos& sos, double f, double fs) {
  const cplx zinv = std::polar(1.0, -2.0 * std::numbers::pi * f / fs);
  cplx h = 1.0;
  for (const auto& s : sos) {
    cplx num = s.b0 + zinv * (s.b1 + zinv * s.b2);
    cplx den = 1.0 + zinv * (s.a1 + zinv * s.a2);
    h *= num / den;
  }
  return h;
}

std::vector<double> step_initial_state(const Sos& sos) {
  std::vector<double> zi(2 * sos.size());
  double u = 1.0;
  for (std::size_t k = 0; k < sos.size(); ++k) {
    const auto& s = sos[k];
    double y = u * (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    double z2 = s.b2 * u - s.a2 * y;
    double z1 = s.b1 * u - s.a1 * y + z2;
    zi[2 * k] = z1;
    zi[2 * k + 1] = z2;
    u = y;
  }
  return zi;
}

std::vector<double> filter(const Sos& sos, std::span<const double> x, std::vector<double>* zi) {
  std::vector<double> y(x.begin(), x.end());
  std::vector<double> state = zi ? *zi : std::vector<double>(2 * sos.size(), 0.0);
  for (std::size_t k = 0; k < sos.size(); ++k) {
    const auto& s = sos[k];
    double z1 = state[2 * k];
    double z2 = state[2 * k + 1];
    for (double& v : y) {
      double in = v;
      double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
    state[2 * k] = z1;
    state[2 * k + 1] = z2;
  }
  if (zi) *zi = std::move(state);
  return y;
}

std::vector<double> filtfilt(const Sos& sos, std::span<const double> x, std::size_t padlen) {
  const std::size_t n = x.size();
  if (n < 2) throw InsufficientDataError(kModule, "filtfilt needs at least 2 samples");
  padlen = std::min(padlen, n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * padlen);
  for (std::size_t k = padlen; k >= 1; --k) ext.push_back(2.0 * x[0] - x[k]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t k = 1; k <= padlen; ++k) ext.push_back(2.0 * x[n - 1] - x[n - 1 - k]);

  const std::vector<double> zi_unit = step_initial_state(sos);
  auto scaled = [&](double x0) {
    std::vector<double> zi = zi_unit;
    for (double& z : zi) z *= x0;
    return zi;
  };

  auto zf = scaled(ext.front());
  std::vector<double> y = filter(sos, ext, &zf);
  std::reverse(y.begin(), y.end());
  auto zb = scaled(y.front());
  y = filter(sos, y, &zb);
  std::reverse(y.begin(), y.end());
  return std::vector<double>(y.begin() + static_cast<std::ptrdiff_t>(padlen),
                             y.begin() + static_cast<std::ptrdiff_t>(padlen + n));
}

}  // namespace deftrace::iir
