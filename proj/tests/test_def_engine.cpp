#include <cmath>
#include <random>

#include "doctest.h"
#include "deftrace/def_engine.hpp"
#include "deftrace/dq_transform.hpp"
#include "deftrace/error.hpp"
#include "deftrace/mode_filter.hpp"
#include "oracles.hpp"

using namespace deftrace;
using oracle::cplx;
using oracle::kPi;
using oracle::kTwoPi;

namespace {

SampleSeries cosine(double a, double f, double phase, double fs, std::size_t n, double t0 = 0.0) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = a * std::cos(kTwoPi * f * (t0 + k / fs) + phase);
  return SampleSeries(std::move(x), fs, t0);
}

SampleSeries zeros(double fs, std::size_t n) { return SampleSeries(std::vector<double>(n, 0.0), fs); }

SampleSeries scaled(const SampleSeries& x, double s) {
  std::vector<double> y(x.values().begin(), x.values().end());
  for (double& v : y) v *= s;
  return SampleSeries(std::move(y), x.fs(), x.t0());
}

DefTrace trace_of(const SampleSeries& w, double mode_freq) {
  return DefTrace{w, "1", "x", Mode{mode_freq, 0.9 * mode_freq, 1.1 * mode_freq, 20.0}, w.span()};
}

// One terminal: voltage and current space vectors with a fundamental and a
// pair of sidebands at f0 +/- df. In the theta0 = 0 frame the dq phasors are
// X0 + U e^{j 2 pi df t} + L e^{-j 2 pi df t}.
struct Terminal {
  double f0 = 60.0, df = 25.0;
  cplx v0 = 1.0, vu, vl, i0 = 0.5, iu, il;

  cplx v_dq(double t) const { return v0 + vu * std::polar(1.0, kTwoPi * df * t) + vl * std::polar(1.0, -kTwoPi * df * t); }
  cplx i_dq(double t) const { return i0 + iu * std::polar(1.0, kTwoPi * df * t) + il * std::polar(1.0, -kTwoPi * df * t); }

  ThreePhaseSignal abc(bool current, double fs, std::size_t n, std::mt19937_64* rng = nullptr, double noise = 0.0) const {
    const auto x = oracle::sample_space_vector(
        [&](double t) { return (current ? i_dq(t) : v_dq(t)) * std::polar(1.0, kTwoPi * f0 * t); }, fs, n);
    auto noisy = [&](std::vector<double> v) {
      if (rng) {
        std::normal_distribution<double> nd(0.0, noise);
        for (double& s : v) s += nd(*rng);
      }
      return SampleSeries(std::move(v), fs);
    };
    return ThreePhaseSignal(noisy(x.a), noisy(x.b), noisy(x.c));
  }
};

SlopeSummary pipeline_slope(const ThreePhaseSignal& v, const ThreePhaseSignal& i, const Mode& m, double t_win) {
  const ParkReference ref{60.0, 0.0, 0.0};
  const DqSignal vdq = park_transform(v, ref), idq = park_transform(i, ref);
  auto prep = [&](const SampleSeries& s) { return bandpass(detrend(s, Detrend::mean()), m); };
  const SampleSeries w = accumulate_def(prep(idq.d()), prep(idq.q()), prep(vdq.d()), prep(vdq.q()));
  return estimate_slope(DefTrace{w, "1", "x", m, reliable_span(w.span(), m)}, t_win);
}

}  // namespace

TEST_CASE("zero and constant inputs accumulate nothing") {
  const double fs = 1000.0;
  const SampleSeries w0 = accumulate_def(zeros(fs, 500), zeros(fs, 500), zeros(fs, 500), zeros(fs, 500));
  for (double v : w0.values()) CHECK(v == 0.0);
  const SampleSeries c(std::vector<double>(500, 0.7), fs), d(std::vector<double>(500, -2.0), fs);
  const SampleSeries w1 = accumulate_def(c, d, c, d);
  for (double v : w1.values()) CHECK(v == 0.0);
  CHECK(w1.size() == 500);
  CHECK(w1.t0() == c.t0());
}

TEST_CASE("quadrature pair gives the brute-force cycle-averaged rate") {
  const double fs = 20000.0, f = 25.0, w = kTwoPi * f;
  const std::size_t n = static_cast<std::size_t>(4.0 * fs) + 1;  // 100 cycles
  const SampleSeries id = cosine(1.0, f, 0.0, fs, n), vq = cosine(1.0, f, -kPi / 2, fs, n);
  const SampleSeries tr = accumulate_def(id, zeros(fs, n), zeros(fs, n), vq);
  const double oracle_rate = oracle::integrate_dq_rate([&](double t) { return std::cos(w * t); },
                                                       [](double) { return 0.0; }, [](double) { return 0.0; },
                                                       [&](double t) { return -w * std::sin(w * t - kPi / 2); }, f, 100);
  CHECK(oracle_rate == doctest::Approx(25.0 * kPi).epsilon(1e-6));
  CHECK(tr[n - 1] / 4.0 == doctest::Approx(oracle_rate).epsilon(1e-3));
  const SlopeSummary s = estimate_slope(trace_of(tr, f), 0.5);
  CHECK(s.summary.wdot == doctest::Approx(oracle_rate).epsilon(1e-3));
}

TEST_CASE("misaligned inputs are rejected") {
  const SampleSeries a = zeros(1000.0, 100), b = zeros(1000.0, 99), c(std::vector<double>(100, 0.0), 1000.0, 0.5);
  CHECK_THROWS_AS(accumulate_def(a, a, a, b), AlignmentError);
  CHECK_THROWS_AS(accumulate_def(a, c, a, a), AlignmentError);
}

TEST_CASE("slope of simple traces") {
  const double fs = 1000.0;
  const std::size_t n = 5000;
  std::vector<double> line(n), rip(n), big(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = k / fs;
    line[k] = 3.25 * t;
    rip[k] = 3.25 * t + 0.02 * std::sin(kTwoPi * 25.0 * t);
    big[k] = 3.25 * t + 0.8 * std::sin(kTwoPi * 25.0 * t);
  }
  SUBCASE("exact line") {
    const auto ws = def_slope(trace_of(SampleSeries(line, fs), 25.0), 0.5);
    REQUIRE(ws.size() >= 17);
    for (const auto& e : ws) {
      CHECK(e.wdot == doctest::Approx(3.25).epsilon(1e-9));
      CHECK(e.std_error < 1e-9);
      CHECK(e.window.end - e.window.start == doctest::Approx(0.5));
    }
    CHECK(ws[1].window.start - ws[0].window.start == doctest::Approx(0.25));
  }
  SUBCASE("line plus ripple over whole cycles") {
    const SlopeSummary s = estimate_slope(trace_of(SampleSeries(rip, fs), 25.0), 0.4);
    CHECK(s.summary.wdot == doctest::Approx(3.25).epsilon(0.01));
    CHECK(s.summary.std_error >= 0.0);
    // a plain line fit over whole cycles is biased by -12 s / (w T^2) for a sine ripple
    const double T = 0.4, w = kTwoPi * 25.0;
    const SampleSeries bs(big, fs);
    for (const auto& e : window_slopes(bs, T, bs.span())) {
      CHECK(e.wdot == doctest::Approx(3.25 - 12.0 * 0.8 / (w * T * T)).epsilon(1e-3));
    }
    // the mode-aware fit is not
    for (const auto& e : def_slope(trace_of(bs, 25.0), T)) CHECK(e.wdot == doctest::Approx(3.25).epsilon(1e-6));
  }
  SUBCASE("ripple as large as ten times the rise per window") {
    for (double f : {10.0, 25.0, 105.0}) {
      const double T = 8.0 / f, c = 0.7, amp = 10.0 * c * T;
      std::vector<double> x(n);
      for (std::size_t k = 0; k < n; ++k) x[k] = c * (k / fs) + amp * std::sin(kTwoPi * f * k / fs);
      CHECK(estimate_slope(trace_of(SampleSeries(x, fs), f), T).summary.wdot == doctest::Approx(c).epsilon(0.01));
    }
  }
  SUBCASE("flat trace") {
    const SlopeSummary s = estimate_slope(trace_of(zeros(fs, n), 25.0), 0.5);
    CHECK(s.summary.wdot == 0.0);
  }
  SUBCASE("windows stay inside the reliable span") {
    DefTrace tr = trace_of(SampleSeries(rip, fs), 25.0);
    tr.reliable = {0.6, 4.4};
    for (const auto& e : def_slope(tr, 0.5)) {
      CHECK(e.window.start >= 0.6 - 1e-12);
      CHECK(e.window.end <= 4.4 + 1e-12);
    }
  }
}

TEST_CASE("slope window errors") {
  const SampleSeries w = zeros(1000.0, 2000);
  CHECK_THROWS_AS(def_slope(trace_of(w, 25.0), 0.1), ConfigError);  // 2.5 periods
  CHECK_THROWS_AS(def_slope(trace_of(w, 25.0), 3.0), InsufficientDataError);
  CHECK_THROWS_AS(window_slopes(w, 0.0, w.span()), ConfigError);
  DefTrace tr = trace_of(w, 25.0);
  tr.reliable = {0.6, 0.9};
  CHECK_THROWS_AS(estimate_slope(tr, 0.5), InsufficientDataError);
  CHECK_THROWS_AS(summarize_slopes({}), InsufficientDataError);
}

TEST_CASE("bilinearity in currents and voltages") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  const double fs = 2000.0;
  const std::size_t n = 800;
  auto rnd = [&] {
    std::vector<double> x(n);
    for (double& v : x) v = nd(rng);
    return SampleSeries(x, fs);
  };
  const SampleSeries id = rnd(), iq = rnd(), vd = rnd(), vq = rnd();
  const SampleSeries w = accumulate_def(id, iq, vd, vq);
  for (double a : {2.5, 0.01, -3.0}) {
    const SampleSeries wa = accumulate_def(scaled(id, a), scaled(iq, a), vd, vq);
    const SampleSeries wb = accumulate_def(id, iq, scaled(vd, a), scaled(vq, a));
    for (std::size_t k = 0; k < n; k += 17) {
      CHECK(wa[k] == doctest::Approx(a * w[k]).epsilon(1e-9));
      CHECK(wb[k] == doctest::Approx(a * w[k]).epsilon(1e-9));
    }
  }
  // slope sign survives positive rescaling
  const SampleSeries id2 = cosine(1.0, 25.0, 0.0, fs, 4000), vq2 = cosine(1.0, 25.0, -1.0, fs, 4000);
  const double s1 = estimate_slope(trace_of(accumulate_def(id2, zeros(fs, 4000), zeros(fs, 4000), vq2), 25.0), 0.5)
                        .summary.wdot;
  const double s2 = estimate_slope(trace_of(accumulate_def(scaled(id2, 7.0), zeros(fs, 4000), zeros(fs, 4000),
                                                           scaled(vq2, 0.2)),
                                            25.0),
                                   0.5)
                        .summary.wdot;
  CHECK(s1 > 0.0);
  CHECK(s2 == doctest::Approx(1.4 * s1));
}

// Integration by parts: int i_d dv_q - i_q dv_d = -(int v_q di_d - v_d di_q) over whole cycles.
TEST_CASE("swapping currents and voltages negates the per-cycle increment") {
  // the residual is the O(w dt) cross term sum(di_d dv_q - di_q dv_d)
  const double fs = 50000.0;
  for (double f : {10.0, 25.0, 105.0}) {
    const std::size_t n = static_cast<std::size_t>(fs * 5.0 / f) + 1;  // 5 cycles
    const SampleSeries id = cosine(0.8, f, 0.3, fs, n), iq = cosine(0.5, f, 1.9, fs, n);
    const SampleSeries vd = cosine(1.1, f, -0.4, fs, n), vq = cosine(0.9, f, 2.6, fs, n);
    const SampleSeries wa = accumulate_def(id, iq, vd, vq), wb = accumulate_def(vq, vd, iq, id);
    const auto cyc = static_cast<std::size_t>(fs / f);
    double lo = 0.0, hi = 0.0;
    for (std::size_t k = 0; k <= cyc; ++k) {
      lo = std::min(lo, wa[k]);
      hi = std::max(hi, wa[k]);
    }
    for (int c = 1; c <= 5; ++c) {
      const std::size_t k = static_cast<std::size_t>(c) * cyc;
      CHECK(std::abs(wa[k] + wb[k]) <= 0.01 * (hi - lo));
    }
  }
}

TEST_CASE("summary slope is stable under a one-period shift of the record") {
  Terminal t;
  t.vu = std::polar(0.02, 0.3);
  t.vl = std::polar(0.003, 0.3);
  t.iu = std::polar(0.05, -0.7);
  t.il = std::polar(0.007, 0.5);
  const double fs = 10000.0;
  const std::size_t n = static_cast<std::size_t>(8.0 * fs);
  std::mt19937_64 rng(9);
  const ThreePhaseSignal v = t.abc(false, fs, n, &rng, 0.002), i = t.abc(true, fs, n, &rng, 0.002);
  const Mode m = make_mode(25.0, 0.0, fs / 2);
  const SlopeSummary a = pipeline_slope(v, i, m, 0.5);
  auto cut = [&](const ThreePhaseSignal& x) { return time_slice(x, 1.0 / 25.0, x.a().span().end); };
  const SlopeSummary b = pipeline_slope(cut(v), cut(i), m, 0.5);
  CHECK(std::abs(a.summary.wdot - b.summary.wdot) < 2.0 * std::max(a.summary.std_error, b.summary.std_error));
  CHECK(a.summary.std_error > 0.0);
}

TEST_CASE("pipeline slope agrees with the polar-form energy integral") {
  const double fs = 20000.0;
  const std::size_t n = static_cast<std::size_t>(6.0 * fs);
  struct Case {
    double df;
    cplx vu, vl, iu, il;
  };
  const Case cases[] = {
      {25.0, std::polar(0.02, 0.3), std::polar(0.003, 0.1), std::polar(0.05, -0.8), std::polar(0.008, 0.6)},
      {12.0, std::polar(0.01, -1.0), {}, std::polar(0.04, 0.4), {}},
      {40.0, std::polar(0.015, 2.0), std::polar(0.002, -2.0), std::polar(0.03, 0.9), std::polar(0.004, 1.5)},
  };
  for (const auto& c : cases) {
    Terminal t;
    t.df = c.df;
    t.vu = c.vu;
    t.vl = c.vl;
    t.iu = c.iu;
    t.il = c.il;
    const double oracle_rate = oracle::integrate_polar_rate([&](double s) { return t.v_dq(s); },
                                                            [&](double s) { return t.i_dq(s); }, 10.0 / c.df, 200000);
    const SlopeSummary s = pipeline_slope(t.abc(false, fs, n), t.abc(true, fs, n), make_mode(c.df, 0.0, fs / 2), 0.5);
    CAPTURE(c.df);
    CHECK(std::abs(oracle_rate) > 1e-4);
    CHECK(s.summary.wdot == doctest::Approx(oracle_rate).epsilon(0.05));
  }
}
