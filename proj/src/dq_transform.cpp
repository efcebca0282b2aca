#include "deftrace/dq_transform.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "deftrace/error.hpp"
#include "deftrace/iir.hpp"

namespace deftrace {

namespace {

constexpr const char* kModule = "dq_transform";
constexpr double kTwoPiThirds = 2.0 * std::numbers::pi / 3.0;

}  // namespace

double ParkReference::angle(double t) const { return 2.0 * std::numbers::pi * f0 * (t - epoch) + theta0; }

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(a + std::numbers::pi, two_pi);
  if (w < 0.0) w += two_pi;
  w -= std::numbers::pi;
  // fmod can land exactly on +pi after rounding
  if (w >= std::numbers::pi) w -= two_pi;
  return w;
}

DqSignal::DqSignal(SampleSeries d, SampleSeries q, ParkReference ref)
    : d_(std::move(d)), q_(std::move(q)), ref_(ref) {
  if (!d_.aligned_with(q_)) throw AlignmentError(kModule, "d and q components are not aligned");
  if (!(ref_.f0 > 0.0)) throw ConfigError(kModule, "reference frequency must be > 0");
  ref_.theta0 = wrap_angle(ref_.theta0);
}

DqSignal park_transform(const ThreePhaseSignal& x, const ParkReference& ref) {
  if (!(ref.f0 > 0.0)) throw ConfigError(kModule, "f0 must be > 0");
  const std::size_t n = x.size();
  std::vector<double> d(n), q(n);
  const auto a = x.a().values();
  const auto b = x.b().values();
  const auto c = x.c().values();
  for (std::size_t k = 0; k < n; ++k) {
    const double th = ref.angle(x.a().time(k));
    const double ca = std::cos(th), cb = std::cos(th - kTwoPiThirds), cc = std::cos(th + kTwoPiThirds);
    const double sa = std::sin(th), sb = std::sin(th - kTwoPiThirds), sc = std::sin(th + kTwoPiThirds);
    d[k] = (2.0 / 3.0) * (a[k] * ca + b[k] * cb + c[k] * cc);
    q[k] = -(2.0 / 3.0) * (a[k] * sa + b[k] * sb + c[k] * sc);
  }
  return DqSignal(SampleSeries(std::move(d), x.fs(), x.t0()), SampleSeries(std::move(q), x.fs(), x.t0()), ref);
}

DqSignal park_transform(const ThreePhaseSignal& x, double f0, double theta0) {
  return park_transform(x, ParkReference{f0, theta0, x.t0()});
}

ThreePhaseSignal inverse_park(const DqSignal& x) {
  const std::size_t n = x.d().size();
  std::vector<double> a(n), b(n), c(n);
  const auto& ref = x.reference();
  for (std::size_t k = 0; k < n; ++k) {
    const double th = ref.angle(x.d().time(k));
    const double d = x.d()[k];
    const double q = x.q()[k];
    a[k] = d * std::cos(th) - q * std::sin(th);
    b[k] = d * std::cos(th - kTwoPiThirds) - q * std::sin(th - kTwoPiThirds);
    c[k] = d * std::cos(th + kTwoPiThirds) - q * std::sin(th + kTwoPiThirds);
  }
  const double fs = x.d().fs();
  const double t0 = x.d().t0();
  return ThreePhaseSignal(SampleSeries(std::move(a), fs, t0), SampleSeries(std::move(b), fs, t0),
                          SampleSeries(std::move(c), fs, t0));
}

ParkReference estimate_reference(const ThreePhaseSignal& v, double f0, double span) {
  if (!(f0 > 0.0)) throw ConfigError(kModule, "f0 must be > 0");
  const double usable = std::min(span, v.span().length());
  const double cycles = std::floor(usable * f0 + 1e-9);
  if (cycles < 10.0) {
    throw InsufficientDataError(kModule, "reference estimation needs at least 10 fundamental cycles");
  }
  const auto n = static_cast<std::size_t>(std::llround(cycles / f0 * v.fs()));
  const std::size_t count = std::min(n, v.size());

  // Space vector x = 2/3 (a + alpha b + alpha^2 c), demodulated at f0.
  const std::complex<double> alpha = std::polar(1.0, kTwoPiThirds);
  std::complex<double> acc = 0.0;
  double power = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    std::complex<double> sv = (2.0 / 3.0) * (v.a()[k] + alpha * v.b()[k] + alpha * alpha * v.c()[k]);
    double t = static_cast<double>(k) / v.fs();
    acc += sv * std::polar(1.0, -2.0 * std::numbers::pi * f0 * t);
    power += std::norm(sv);
  }
  acc /= static_cast<double>(count);
  const double rms = std::sqrt(power / static_cast<double>(count));
  if (!(std::abs(acc) > 0.01 * rms) || !(rms > 0.0)) {
    throw ReferenceError(kModule, "fundamental amplitude is below the noise floor");
  }
  return ParkReference{f0, wrap_angle(std::arg(acc)), v.t0()};
}

double estimate_reference_phase(const ThreePhaseSignal& v, double f0, double span) {
  return estimate_reference(v, f0, span).theta0;
}

SampleSeries detrend(const SampleSeries& x, const Detrend& mode, double lowest_mode_freq) {
  std::vector<double> out(x.values().begin(), x.values().end());
  if (mode.kind == Detrend::Kind::Mean) {
    const double m = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
    for (double& v : out) v -= m;
    return SampleSeries(std::move(out), x.fs(), x.t0());
  }
  if (!(mode.fc > 0.0)) throw ConfigError(kModule, "lowpass detrend cutoff must be > 0");
  if (mode.fc >= lowest_mode_freq) {
    throw ConfigError(kModule, "lowpass detrend cutoff must be below the lowest mode frequency");
  }
  const auto sos = iir::butter_lowpass(4, mode.fc, x.fs());
  const auto pad = static_cast<std::size_t>(std::ceil(3.0 / mode.fc * x.fs()));
  const auto trend = iir::filtfilt(sos, x.values(), pad);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] -= trend[k];
  return SampleSeries(std::move(out), x.fs(), x.t0());
}

}  // namespace deftrace
