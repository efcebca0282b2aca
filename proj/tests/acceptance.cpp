// Acceptance run: one line per criterion, exit status 0 only if all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "deftrace/def_engine.hpp"
#include "deftrace/dq_transform.hpp"
#include "deftrace/mode_filter.hpp"
#include "deftrace/mode_id.hpp"
#include "deftrace/pipeline.hpp"
#include "deftrace/synth_bench.hpp"
#include "synth_helpers.hpp"

using namespace deftrace;
using synth::cplx;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

// 1. Sidebands at 12 Hz and 108 Hz around 60 Hz appear as one 48 Hz mode in dq.
Outcome frequency_translation() {
  const double fs = 10000.0;
  const ThreePhaseSignal x =
      synth::synthesize_three_phase({{60.0, 0.0, 1.0}, {12.0, 0.0, std::polar(0.08, 0.4)}, {108.0, 0.0, std::polar(0.05, -1.1)}},
                                    fs, 10.0);
  const DqSignal dq = park_transform(x, estimate_reference(x, 60.0, 1.0));
  const std::vector<Spectrum> sp = {compute_psd(dq.d(), 1.0, 0.5), compute_psd(dq.q(), 1.0, 0.5)};
  const std::vector<Mode> modes = identify_modes(sp, ModeIdOptions{});
  if (modes.empty()) return {false, "no mode found"};
  const bool ok = modes.size() == 1 && std::abs(modes[0].freq - 48.0) <= 0.5;
  return {ok, fmt("%.0f mode(s), dominant at %.2f Hz", static_cast<double>(modes.size()), modes[0].freq)};
}

// 2. Randomised single-terminal phasor scenarios through the full chain.
Outcome def_oracle_equivalence() {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> amp(0.01, 1.0), ph(-kPi, kPi), df_dist(10.0, 110.0);
  const double fs = 50000.0, f0 = 60.0, duration = 3.0;
  int accepted = 0, rejected = 0, sign_ok = 0, within = 0;
  double worst = 0.0;
  while (accepted < 20) {
    const double df = df_dist(rng);
    const synth::SidebandSpec v{df, std::polar(amp(rng), ph(rng)), std::polar(amp(rng), ph(rng))};
    const synth::SidebandSpec i{df, std::polar(amp(rng), ph(rng)), std::polar(amp(rng), ph(rng))};
    const double truth = synth::sideband_def_rate(v, i);
    const double omega = 2.0 * kPi * df;
    const double scale = omega * (std::abs(v.upper) * std::abs(i.upper) + std::abs(v.lower) * std::abs(i.lower));
    if (std::abs(truth) < 0.25 * scale) {
      ++rejected;
      continue;
    }
    ++accepted;
    auto abc = [&](const synth::SidebandSpec& s, cplx fundamental) {
      return synth::synthesize_three_phase(
          {{f0, 0.0, fundamental}, {f0 + df, 0.0, s.upper}, {f0 - df, 0.0, s.lower}}, fs, duration);
    };
    const ThreePhaseSignal va = abc(v, 1.0), ia = abc(i, std::polar(0.5, -0.3));
    const ParkReference ref = estimate_reference(va, f0, 1.0);
    const DqSignal vdq = park_transform(va, ref), idq = park_transform(ia, ref);
    const Mode m = make_mode(df, 0.0, fs / 2);
    auto prep = [&](const SampleSeries& s) { return bandpass(detrend(s, Detrend::mean()), m); };
    const SampleSeries w = accumulate_def(prep(idq.d()), prep(idq.q()), prep(vdq.d()), prep(vdq.q()));
    const double got = estimate_slope(DefTrace{w, "1", "x", m, reliable_span(w.span(), m)}, 0.5).summary.wdot;
    const double err = std::abs(got - truth) / std::abs(truth);
    worst = std::max(worst, err);
    if (err <= 0.05) ++within;
    if ((got > 0) == (truth > 0)) ++sign_ok;
  }
  const bool ok = within == 20 && sign_ok == 20;
  return {ok, fmt("%.0f/20 within 5%%, signs %.0f/20, worst %.2f%%, %.0f ill-conditioned draws skipped", within,
                  sign_ok, 100.0 * worst, rejected)};
}

bool labels_match(const AnalysisReport& rep, const synth::OracleTruth& truth, std::string& why) {
  bool ok = rep.graphs.size() == truth.modes.size();
  if (!ok) why += "mode count differs; ";
  for (const auto& m : truth.modes) {
    const ModeGraph* g = testing_support::graph_near(rep, m.delta_f);
    if (!g) {
      ok = false;
      why += fmt("no graph near %.0f Hz; ", m.delta_f);
      continue;
    }
    for (const auto& [id, l] : m.intended) {
      auto it = g->element_labels.find(id);
      const Label got = it == g->element_labels.end() ? Label::Neutral : it->second;
      if (got != l) {
        ok = false;
        why += id + "@" + mode_tag(m.delta_f) + "=" + to_string(got) + " (want " + to_string(l) + "); ";
      }
    }
  }
  return ok;
}

std::string label_summary(const AnalysisReport& rep) {
  std::string s;
  for (const auto& g : rep.graphs) {
    s += mode_tag(g.mode.freq) + " Hz:";
    for (const char* id : {"SG", "WG", "SC"}) {
      auto it = g.element_labels.find(id);
      if (it != g.element_labels.end()) s += std::string(" ") + id + "=" + to_string(it->second);
    }
    s += "; ";
  }
  return s.substr(0, s.size() - 2);
}

// 3. Role switch between the 25 Hz and 105 Hz modes.
Outcome role_switch() {
  const auto r = synth::synthesize_scenario(synth::role_switch_scenario());
  const AnalysisReport rep = run_analysis(r.dataset, AnalysisConfig{});
  std::string why;
  const bool ok = labels_match(rep, r.truth, why);
  return {ok, label_summary(rep) + (why.empty() ? "" : " | " + why)};
}

// 4. Two-end conservation on lossless and dissipative lines.
Outcome conservation() {
  AnalysisConfig cfg;
  auto ends = [&](double r_line, double& a, double& b, double& truth) {
    const auto s = synth::synthesize_scenario(synth::two_node_scenario(r_line));
    const AnalysisReport rep = run_analysis(s.dataset, cfg);
    const SlopeTable t = slope_table(rep.def.slopes, rep.graphs.at(0).mode.freq);
    a = t.at({"1", "e12"}).wdot;
    b = t.at({"2", "e12"}).wdot;
    truth = s.truth.modes.at(0).line_dissipation.at("e12");
  };
  double a0, b0, t0, a1, b1, t1;
  ends(0.0, a0, b0, t0);
  ends(0.05, a1, b1, t1);
  const double lossless = std::abs(a0 + b0) / std::max(std::abs(a0), std::abs(b0));
  const double lossy_err = std::abs((a1 + b1) - t1) / std::abs(t1);
  const bool ok = lossless <= 0.02 && (a1 + b1) > 0.0 && lossy_err <= 0.05;
  return {ok, fmt("lossless imbalance %.3f%%, lossy sum %.4g vs analytic %.4g (%.2f%%)", 100.0 * lossless, a1 + b1,
                  t1, 100.0 * lossy_err)};
}

// 5. inverse_park(park_transform(x)) == x on random multi-sideband signals.
Outcome park_roundtrip() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  const int trials = 120;
  for (int t = 0; t < trials; ++t) {
    const double fs = 2000.0 + 8000.0 * u(rng);
    std::vector<synth::Component> comps = {{60.0, 0.0, std::polar(0.5 + u(rng), 2 * kPi * u(rng))}};
    const int n = 1 + static_cast<int>(6 * u(rng));
    for (int k = 0; k < n; ++k) {
      const double df = 5.0 + 100.0 * u(rng);
      comps.push_back({60.0 + (u(rng) < 0.5 ? df : -df), 0.0, std::polar(0.3 * u(rng), 2 * kPi * u(rng))});
    }
    const ThreePhaseSignal x = synth::synthesize_three_phase(comps, fs, 0.5, 3.0 * u(rng));
    const ThreePhaseSignal y = inverse_park(park_transform(x, 60.0, 2 * kPi * u(rng) - kPi));
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      for (auto [p, r] : {std::pair{&x.a(), &y.a()}, {&x.b(), &y.b()}, {&x.c(), &y.c()}}) {
        num = std::max(num, std::abs((*p)[k] - (*r)[k]));
        den = std::max(den, std::abs((*p)[k]));
      }
    }
    worst = std::max(worst, num / den);
  }
  return {worst <= 1e-9, fmt("%.0f trials, worst relative error %.2e", trials, worst)};
}

// 6. Slope of c t + s sin(2 pi df t) with s up to 10 c t_win.
Outcome slope_estimator() {
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double fs = 2000.0;
  double worst = 0.0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    const double df = 5.0 + 105.0 * u(rng);
    const double t_win = std::ceil(3.0 + 20.0 * u(rng)) / df;
    const double c = (u(rng) < 0.5 ? -1.0 : 1.0) * (0.01 + 5.0 * u(rng));
    const double s = 10.0 * std::abs(c) * t_win * u(rng);
    const double phase = 2 * kPi * u(rng);
    const std::size_t n = static_cast<std::size_t>((4.0 * t_win + 0.5) * fs);
    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double tt = k / fs;
      w[k] = c * tt + s * std::sin(2 * kPi * df * tt + phase);
    }
    const SampleSeries ws(std::move(w), fs);
    const Mode m{df, 0.9 * df, 1.1 * df, 0.0};
    const double got = estimate_slope(DefTrace{ws, "1", "x", m, ws.span()}, t_win).summary.wdot;
    worst = std::max(worst, std::abs(got - c) / std::abs(c));
  }
  return {worst <= 0.01, fmt("%.0f trials, worst relative error %.2e", trials, worst)};
}

// 7. Threshold monotonicity and scaling invariance over random slope tables.
Outcome graph_properties() {
  std::mt19937_64 rng(7007);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Topology topo = synth::role_switch_scenario().topo;
  int mono_fail = 0, scale_fail = 0;
  const int cases = 200;
  auto directed = [](const ModeGraph& g, const DirectedEdge& e) {
    for (const auto& d : g.directed_edges) {
      if (d.edge == e.edge && d.from == e.from && d.to == e.to) return true;
    }
    return false;
  };
  for (int c = 0; c < cases; ++c) {
    SlopeTable s;
    for (const auto& e : topo.edges()) {
      for (const auto& n : {e.node_i, e.node_j}) {
        if (u(rng) < 0.85) s[{n, e.id}] = {nd(rng), std::abs(nd(rng)) * 0.1, {}};
      }
    }
    for (const auto& sh : topo.shunts()) s[{sh.node, sh.id}] = {nd(rng), 0.01, {}};

    const double e1 = std::abs(nd(rng)), e2 = e1 + std::abs(nd(rng));
    const ModeGraph lo = build_mode_graph(s, topo, e1), hi = build_mode_graph(s, topo, e2);
    for (const auto& e : hi.directed_edges) {
      if (!directed(lo, e)) ++mono_fail;
    }

    // scaling v by a and i by b scales every slope (and stderr) by a b > 0
    const double ab = std::exp(6.0 * nd(rng));
    SlopeTable t = s;
    for (auto& [k, v] : t) {
      v.wdot *= ab;
      v.std_error *= ab;
    }
    const Threshold rel{0.05 + 0.3 * u(rng), true};
    ModeGraph g0 = build_mode_graph(s, topo, rel), g1 = build_mode_graph(t, topo, rel);
    classify_nodes(g0, s, topo, rel);
    classify_nodes(g1, t, topo, rel);
    bool same = g0.node_labels == g1.node_labels && g0.element_labels == g1.element_labels &&
                g0.directed_edges.size() == g1.directed_edges.size();
    for (const auto& e : g1.directed_edges) same = same && directed(g0, e);
    if (!same) ++scale_fail;
  }
  return {mono_fail == 0 && scale_fail == 0,
          fmt("%.0f cases, %.0f monotonicity and %.0f scaling violations", cases, mono_fail, scale_fail)};
}

// 8. Role switch under 1% and 10% channel noise.
Outcome noise_robustness() {
  AnalysisConfig cfg;
  const auto clean = synth::synthesize_scenario(synth::role_switch_scenario());
  const AnalysisReport ref = run_analysis(clean.dataset, cfg);
  std::string detail;
  bool ok = true;
  for (double level : {0.01, 0.10}) {
    auto spec = synth::role_switch_scenario();
    spec.noise = level;
    spec.seed = 11;
    const auto noisy = synth::synthesize_scenario(spec);
    const AnalysisReport rep = run_analysis(noisy.dataset, cfg);
    std::string why;
    bool lab = labels_match(rep, noisy.truth, why);
    int flips = 0, unresolved = 0;
    for (const auto& g : ref.graphs) {
      const ModeGraph* gn = testing_support::graph_near(rep, g.mode.freq);
      if (!gn) continue;
      const SlopeTable a = slope_table(ref.def.slopes, g.mode.freq);
      const SlopeTable b = slope_table(rep.def.slopes, gn->mode.freq);
      for (const auto& [k, v] : a) {
        auto it = b.find(k);
        if (it == b.end() || (it->second.wdot > 0) != (v.wdot > 0)) {
          ++flips;
          // clean slope inside two noisy standard errors of zero
          if (it != b.end() && std::abs(v.wdot) < 2.0 * it->second.std_error) ++unresolved;
        }
      }
    }
    const bool this_ok = lab && (level < 0.05 || flips == 0);
    ok = ok && this_ok;
    detail += fmt("%.0f%% noise: labels ", 100.0 * level) + (lab ? "match" : "MISMATCH (" + why + ")") +
              fmt(", %.0f sign flips", flips) +
              (flips > 0 ? fmt(" (%.0f within 2 stderr of zero)", unresolved) : std::string()) + "; ";
  }
  return {ok, detail.substr(0, detail.size() - 2)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
    double budget_s;
  };
  const std::vector<Criterion> all = {
      {1, "frequency translation 12/108 Hz -> 48 Hz", frequency_translation, 5.0},
      {2, "DEF oracle equivalence, 20 random terminals", def_oracle_equivalence, 30.0},
      {3, "role switch labels at 25 Hz and 105 Hz", role_switch, 60.0},
      {4, "two-end conservation", conservation, 0.0},
      {5, "Park roundtrip", park_roundtrip, 0.0},
      {6, "slope estimator under mode ripple", slope_estimator, 0.0},
      {7, "graph threshold monotonicity and scaling invariance", graph_properties, 0.0},
      {8, "noise robustness of the role switch", noise_robustness, 0.0},
  };
  int failed = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0.0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += fmt(" | over the %.0f s budget", c.budget_s);
    }
    if (!o.pass) ++failed;
    std::printf("criterion %d: %s  %s: %s [%.2f s]\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
