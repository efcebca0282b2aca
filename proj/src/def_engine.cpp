#include "deftrace/def_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "deftrace/error.hpp"

namespace deftrace {

namespace {

constexpr const char* kModule = "def_engine";

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

SampleSeries accumulate_def(const SampleSeries& did, const SampleSeries& diq, const SampleSeries& dvd,
                            const SampleSeries& dvq) {
  if (!did.aligned_with(diq) || !did.aligned_with(dvd) || !did.aligned_with(dvq)) {
    throw AlignmentError(kModule, "DEF inputs are not time-aligned");
  }
  const std::size_t n = did.size();
  std::vector<double> w(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    w[k + 1] = w[k] + did[k] * (dvq[k + 1] - dvq[k]) - diq[k] * (dvd[k + 1] - dvd[k]);
  }
  return SampleSeries(std::move(w), did.fs(), did.t0());
}

std::vector<SlopeEstimate> window_slopes(const SampleSeries& w, double t_win, const TimeSpan& span, double ripple_freq) {
  if (!(t_win > 0.0)) throw ConfigError(kModule, "t_win must be > 0");
  const TimeSpan avail{std::max(span.start, w.span().start), std::min(span.end, w.span().end)};
  if (avail.length() + 1e-9 < t_win) {
    throw InsufficientDataError(kModule, "reliable span of " + std::to_string(std::max(0.0, avail.length())) +
                                             " s is shorter than t_win = " + std::to_string(t_win) + " s");
  }
  // Ripple terms need at least one full period in the window to stay separable from the line.
  const bool ripple = ripple_freq > 0.0 && ripple_freq * t_win >= 1.0 - 1e-9;
  const int p = ripple ? 6 : 2;
  const double omega = 2.0 * std::numbers::pi * ripple_freq;

  std::vector<SlopeEstimate> out;
  const double stride = t_win / 2.0;
  for (int j = 0;; ++j) {
    const double s = avail.start + stride * j;
    const double e = s + t_win;
    if (e > avail.end + 1e-9) break;
    const double x0 = (s - w.t0()) * w.fs();
    const double x1 = (e - w.t0()) * w.fs();
    const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(x0 - 1e-6)));
    const auto last = std::min(w.size(), static_cast<std::size_t>(std::ceil(x1 - 1e-6)));
    if (last < first + static_cast<std::size_t>(p) + 1) {
      throw InsufficientDataError(kModule, "slope window holds too few samples");
    }

    // Time centred on the window and scaled to [-1/2, 1/2] for conditioning.
    const double mid = 0.5 * (s + e);
    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd atb = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd row(p);
    auto fill = [&](std::size_t k) {
      const double t = w.time(k);
      row[0] = 1.0;
      row[1] = (t - mid) / t_win;
      if (ripple) {
        const double ph = omega * (t - s);
        row[2] = std::cos(ph);
        row[3] = std::sin(ph);
        row[4] = std::cos(2.0 * ph);
        row[5] = std::sin(2.0 * ph);
      }
    };
    for (std::size_t k = first; k < last; ++k) {
      fill(k);
      ata.selfadjointView<Eigen::Lower>().rankUpdate(row);
      atb += row * w[k];
    }
    ata.triangularView<Eigen::StrictlyUpper>() = ata.transpose();
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(ata);
    const Eigen::VectorXd beta = ldlt.solve(atb);
    double ssr = 0.0;
    for (std::size_t k = first; k < last; ++k) {
      fill(k);
      const double r = w[k] - row.dot(beta);
      ssr += r * r;
    }
    const double n = static_cast<double>(last - first);
    const Eigen::VectorXd unit = Eigen::VectorXd::Unit(p, 1);
    const double c11 = ldlt.solve(unit)[1];
    const double se = std::sqrt(std::max(0.0, ssr / (n - p) * c11)) / t_win;
    out.push_back({beta[1] / t_win, se, {s, e}});
  }
  return out;
}

std::vector<SlopeEstimate> def_slope(const DefTrace& trace, double t_win) {
  if (trace.mode.freq > 0.0 && t_win * trace.mode.freq < 3.0 - 1e-9) {
    throw ConfigError(kModule, "t_win must cover at least 3 periods of the " + std::to_string(trace.mode.freq) +
                                   " Hz mode");
  }
  return window_slopes(trace.w, t_win, trace.reliable, trace.mode.freq);
}

SlopeEstimate summarize_slopes(const std::vector<SlopeEstimate>& windows) {
  if (windows.empty()) throw InsufficientDataError(kModule, "no slope windows to summarise");
  std::vector<double> slopes, errs;
  for (const auto& w : windows) {
    slopes.push_back(w.wdot);
    errs.push_back(w.std_error);
  }
  const double n = static_cast<double>(windows.size());
  const double med = median_of(slopes);
  double mean = 0.0;
  for (double s : slopes) mean += s;
  mean /= n;
  double var = 0.0;
  for (double s : slopes) var += (s - mean) * (s - mean);
  const double sd = n > 1.0 ? std::sqrt(var / (n - 1.0)) : 0.0;
  // 1.2533 = sqrt(pi/2), efficiency factor of the median
  const double spread = 1.2533 * sd / std::sqrt(n);
  const double typical = median_of(errs);
  return {med, std::sqrt(typical * typical + spread * spread),
          {windows.front().window.start, windows.back().window.end}};
}

SlopeSummary estimate_slope(const DefTrace& trace, double t_win) {
  auto windows = def_slope(trace, t_win);
  auto summary = summarize_slopes(windows);
  return {summary, std::move(windows)};
}

}  // namespace deftrace
