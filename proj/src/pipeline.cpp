#include "deftrace/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "deftrace/error.hpp"
#include "deftrace/mode_filter.hpp"
#include "deftrace/parallel.hpp"

namespace deftrace {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModule = "cli";

std::string num17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string num10(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s, const fs::path& file) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw IngestionError(kModule, "malformed number '" + s + "' in " + file.string());
  }
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw IngestionError(kModule, "cannot write " + p.string());
  return out;
}

std::ifstream open_stage_input(const fs::path& p, const char* stage) {
  std::ifstream in(p);
  if (!in) {
    throw ConfigError(kModule, "missing " + p.string() + "; run the `" + std::string(stage) +
                                   "` subcommand on this output directory first");
  }
  return in;
}

const char* kind_name(ElementKind k) { return k == ElementKind::Line ? "line" : "shunt"; }

Detrend detrend_of(const AnalysisConfig& cfg) {
  return cfg.detrend == DetrendMode::Mean ? Detrend::mean() : Detrend::lowpass(cfg.detrend_fc);
}

nlohmann::json config_json(const AnalysisConfig& cfg) {
  std::ostringstream text;
  write_config(text, cfg);
  nlohmann::json j = nlohmann::json::object();
  std::istringstream in(text.str());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

Topology graph_topology(const AnalysisConfig& cfg, const fs::path& dir) {
  const fs::path p = cfg.topology_file.empty() ? dir / "topology.txt" : fs::path(cfg.topology_file);
  std::ifstream in(p);
  if (!in) throw ConfigError(kModule, "cannot open topology " + p.string() + "; pass --topology or run `modes` first");
  return parse_topology(in);
}

}  // namespace

Dataset apply_window(const Dataset& ds, const AnalysisConfig& cfg) {
  if (!cfg.analysis_window) return ds;
  return time_slice(ds, cfg.analysis_window->start, cfg.analysis_window->end);
}

Dataset load_analysis_dataset(const AnalysisConfig& cfg) {
  if (cfg.data_file.empty()) throw ConfigError(kModule, "no waveform file given (--data or `data` in the config)");
  if (cfg.topology_file.empty()) {
    throw ConfigError(kModule, "no topology file given (--topology or `topology` in the config)");
  }
  return apply_window(load_dataset(cfg.data_file, cfg.topology_file), cfg);
}

ModesResult run_modes(const Dataset& ds, const AnalysisConfig& cfg) {
  cfg.validate();
  if (ds.terminals.empty()) throw InsufficientDataError(kModule, "dataset holds no terminal measurements");
  ModesResult out;
  out.unit = ds.unit;
  out.span = ds.terminals.front().v.span();

  out.ref_node = cfg.ref_node;
  if (out.ref_node.empty()) {
    for (const auto& n : ds.topology.nodes()) {
      const bool measured = std::any_of(ds.terminals.begin(), ds.terminals.end(),
                                        [&](const TerminalMeasurement& t) { return t.node == n; });
      if (measured) {
        out.ref_node = n;
        break;
      }
    }
  }
  auto rt = std::find_if(ds.terminals.begin(), ds.terminals.end(),
                         [&](const TerminalMeasurement& t) { return t.node == out.ref_node; });
  if (rt == ds.terminals.end()) {
    throw ConfigError(kModule, "reference node '" + out.ref_node + "' has no voltage measurement");
  }
  out.reference = estimate_reference(rt->v, cfg.f0, std::min(cfg.reference_span, rt->v.span().length()));

  std::vector<std::vector<Spectrum>> per_terminal(ds.terminals.size());
  std::vector<double> mean_square(ds.terminals.size(), 0.0);
  parallel_for(ds.terminals.size(), [&](std::size_t k) {
    const auto& t = ds.terminals[k];
    const DqSignal v = park_transform(t.v, out.reference);
    const DqSignal i = park_transform(t.i, out.reference);
    for (const SampleSeries* s : {&v.d(), &v.q(), &i.d(), &i.q()}) {
      per_terminal[k].push_back(compute_psd(*s, cfg.psd_segment, cfg.psd_overlap));
      double acc = 0.0;
      for (double x : s->values()) acc += x * x;
      mean_square[k] += acc / static_cast<double>(s->size());
    }
  });
  // Total dq power, fundamental included: the yardstick for the mode floor.
  double total_power = 0.0;
  for (double m : mean_square) total_power += m;
  std::vector<Spectrum> all;
  for (auto& v : per_terminal) all.insert(all.end(), v.begin(), v.end());
  out.spectrum = sum_spectra(all);

  ModeIdOptions opt;
  opt.min_prominence_db = cfg.min_prominence_db;
  opt.max_modes = cfg.max_modes;
  opt.min_freq = cfg.min_mode_freq;
  opt.max_freq = cfg.max_mode_freq;
  opt.dynamic_range_db = cfg.dynamic_range_db;
  opt.min_band_power = total_power * std::pow(10.0, -cfg.mode_floor_db / 10.0);
  opt.band_halfwidth = cfg.band_halfwidth;
  out.modes = identify_modes(std::span<const Spectrum>(&out.spectrum, 1), opt);
  return out;
}

std::vector<Mode> select_modes(const std::vector<Mode>& modes, std::optional<double> freq) {
  if (!freq) return modes;
  const Mode* best = nullptr;
  for (const auto& m : modes) {
    if (*freq < m.f_lo || *freq > m.f_hi) continue;
    if (!best || std::abs(m.freq - *freq) < std::abs(best->freq - *freq)) best = &m;
  }
  if (!best) {
    std::string list;
    for (const auto& m : modes) list += (list.empty() ? "" : ", ") + mode_tag(m.freq);
    throw ConfigError(kModule, "no identified mode band contains " + mode_tag(*freq) + " Hz (modes: " +
                                   (list.empty() ? "none" : list) + ")");
  }
  return {*best};
}

DefResult run_def(const Dataset& ds, const AnalysisConfig& cfg, const ParkReference& ref,
                  const std::vector<Mode>& modes) {
  cfg.validate();
  DefResult out;
  if (modes.empty()) return out;
  const std::size_t nt = ds.terminals.size();
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& m : modes) lowest = std::min(lowest, m.freq);
  const Detrend det = detrend_of(cfg);

  std::vector<std::optional<std::pair<DqSignal, DqSignal>>> dq(nt);
  parallel_for(nt, [&](std::size_t k) {
    const auto& t = ds.terminals[k];
    DqSignal v = park_transform(t.v, ref);
    DqSignal i = park_transform(t.i, ref);
    dq[k].emplace(DqSignal(detrend(v.d(), det, lowest), detrend(v.q(), det, lowest), ref),
                  DqSignal(detrend(i.d(), det, lowest), detrend(i.q(), det, lowest), ref));
  });

  const std::size_t n = nt * modes.size();
  std::vector<std::optional<DefTrace>> traces(n);
  std::vector<std::optional<SlopeSummary>> slopes(n);
  BandpassOptions bp;
  bp.order = cfg.filter_order;
  parallel_for(n, [&](std::size_t p) {
    const Mode& m = modes[p / nt];
    const std::size_t k = p % nt;
    const auto& [v, i] = *dq[k];
    const SampleSeries w =
        accumulate_def(bandpass(i.d(), m, bp), bandpass(i.q(), m, bp), bandpass(v.d(), m, bp), bandpass(v.q(), m, bp));
    DefTrace tr{w, ds.terminals[k].node, ds.terminals[k].element, m, reliable_span(w.span(), m)};
    slopes[p] = estimate_slope(tr, cfg.t_win);
    traces[p] = std::move(tr);
  });
  for (std::size_t p = 0; p < n; ++p) {
    const auto& t = ds.terminals[p % nt];
    out.slopes.push_back({t.node, t.element, t.kind, modes[p / nt].freq, *slopes[p]});
    out.traces.push_back(std::move(*traces[p]));
  }
  return out;
}

SlopeTable slope_table(const std::vector<TerminalSlope>& slopes, double mode_freq) {
  SlopeTable t;
  for (const auto& s : slopes) {
    if (s.mode_freq == mode_freq) t[{s.node, s.element}] = s.slope.summary;
  }
  return t;
}

std::vector<ModeGraph> run_graph(const Topology& topo, const std::vector<Mode>& modes,
                                 const std::vector<TerminalSlope>& slopes, const AnalysisConfig& cfg) {
  std::vector<ModeGraph> out;
  for (const auto& m : modes) {
    const SlopeTable table = slope_table(slopes, m.freq);
    if (table.empty()) continue;
    ModeGraph g = build_mode_graph(table, topo, cfg.eps_edge, m);
    classify_nodes(g, table, topo, cfg.eps_node);
    out.push_back(std::move(g));
  }
  return out;
}

nlohmann::json make_report(const AnalysisConfig& cfg, const ModesResult& modes,
                           const std::vector<TerminalSlope>& slopes, const std::vector<ModeGraph>& graphs,
                           const Topology& topo) {
  nlohmann::json r;
  r["status"] = modes.modes.empty() ? kStatusNoSsci : kStatusOk;
  r["unit"] = modes.unit;
  r["conventions"] = {
      {"park", "amplitude-invariant (2/3 scaled), q lags d by 90 degrees; a power-invariant frame rescales W by a "
               "positive constant and leaves every sign unchanged"},
      {"line_current", "flowing out of the node into the line"},
      {"shunt_current", "injected by the element into the node"},
      {"wdot_sign", "positive: oscillation energy leaving the measured device"},
      {"def_unit", modes.unit + "^2 per second"},
  };
  AnalysisConfig resolved = cfg;
  resolved.ref_node = modes.ref_node;
  r["config"] = config_json(resolved);
  r["reference"] = {{"node", modes.ref_node},
                    {"f0", modes.reference.f0},
                    {"theta0", modes.reference.theta0},
                    {"epoch", modes.reference.epoch}};
  r["span"] = {modes.span.start, modes.span.end};
  r["modes"] = nlohmann::json::array();
  for (const auto& m : modes.modes) {
    r["modes"].push_back({{"freq", m.freq}, {"f_lo", m.f_lo}, {"f_hi", m.f_hi}, {"prominence_db", m.prominence_db}});
  }
  r["slopes"] = nlohmann::json::array();
  for (const auto& s : slopes) {
    nlohmann::json rec{{"mode", s.mode_freq},
                       {"node", s.node},
                       {"element", s.element},
                       {"kind", kind_name(s.kind)},
                       {"wdot", s.slope.summary.wdot},
                       {"std_error", s.slope.summary.std_error},
                       {"span", {s.slope.summary.window.start, s.slope.summary.window.end}}};
    rec["windows"] = nlohmann::json::array();
    for (const auto& w : s.slope.windows) {
      rec["windows"].push_back({{"start", w.window.start}, {"end", w.window.end}, {"wdot", w.wdot},
                                {"std_error", w.std_error}});
    }
    r["slopes"].push_back(rec);
  }
  r["graphs"] = nlohmann::json::array();
  for (const auto& g : graphs) r["graphs"].push_back(export_graph(g, topo).record);
  return r;
}

AnalysisReport run_analysis(const Dataset& ds, const AnalysisConfig& cfg) {
  AnalysisReport rep;
  rep.modes = run_modes(ds, cfg);
  rep.def = run_def(ds, cfg, rep.modes.reference, rep.modes.modes);
  rep.graphs = run_graph(ds.topology, rep.modes.modes, rep.def.slopes, cfg);
  rep.json = make_report(cfg, rep.modes, rep.def.slopes, rep.graphs, ds.topology);
  rep.status = rep.json["status"];
  return rep;
}

AnalysisReport run_analysis(const AnalysisConfig& cfg) {
  cfg.validate();
  return run_analysis(load_analysis_dataset(cfg), cfg);
}

// ------------------------------------------------------------ intermediates

void write_modes(const fs::path& dir, const ModesResult& m) {
  auto out = open_out(dir / "modes.csv");
  out << "# unit: " << m.unit << '\n';
  out << "# ref_node: " << m.ref_node << '\n';
  out << "# f0: " << num17(m.reference.f0) << '\n';
  out << "# theta0: " << num17(m.reference.theta0) << '\n';
  out << "# epoch: " << num17(m.reference.epoch) << '\n';
  out << "# span: " << num17(m.span.start) << ' ' << num17(m.span.end) << '\n';
  out << "freq,f_lo,f_hi,prominence_db\n";
  for (const auto& md : m.modes) {
    out << num17(md.freq) << ',' << num17(md.f_lo) << ',' << num17(md.f_hi) << ',' << num17(md.prominence_db)
        << '\n';
  }
  if (!m.spectrum.freqs.empty()) {
    auto sp = open_out(dir / "spectrum.csv");
    sp << "freq,psd\n";
    for (std::size_t k = 0; k < m.spectrum.freqs.size(); ++k) {
      sp << num10(m.spectrum.freqs[k]) << ',' << num10(m.spectrum.psd[k]) << '\n';
    }
  }
}

ModesResult read_modes(const fs::path& dir) {
  const fs::path p = dir / "modes.csv";
  auto in = open_stage_input(p, "modes");
  ModesResult m;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      const std::string key = line.substr(2, colon - 2);
      std::string val = line.substr(colon + 1);
      if (!val.empty() && val[0] == ' ') val.erase(0, 1);
      if (key == "unit") m.unit = val;
      else if (key == "ref_node") m.ref_node = val;
      else if (key == "f0") m.reference.f0 = to_double(val, p);
      else if (key == "theta0") m.reference.theta0 = to_double(val, p);
      else if (key == "epoch") m.reference.epoch = to_double(val, p);
      else if (key == "span") {
        const auto sp = val.find(' ');
        m.span = {to_double(val.substr(0, sp), p), to_double(val.substr(sp + 1), p)};
      }
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 4) throw IngestionError(kModule, "malformed row in " + p.string() + ": " + line);
    m.modes.push_back({to_double(f[0], p), to_double(f[1], p), to_double(f[2], p), to_double(f[3], p)});
  }
  return m;
}

void write_def(const fs::path& dir, const DefResult& d) {
  std::map<double, std::vector<const DefTrace*>> by_mode;
  for (const auto& t : d.traces) by_mode[t.mode.freq].push_back(&t);
  for (const auto& [freq, traces] : by_mode) {
    auto out = open_out(dir / ("def_" + mode_tag(freq) + ".csv"));
    out << "time";
    for (const auto* t : traces) out << ",W:" << t->node << ':' << t->element;
    out << '\n';
    const SampleSeries& w0 = traces.front()->w;
    for (std::size_t k = 0; k < w0.size(); ++k) {
      out << num10(w0.time(k));
      for (const auto* t : traces) out << ',' << num10(t->w[k]);
      out << '\n';
    }
  }
  auto out = open_out(dir / "slopes.csv");
  out << "mode,node,element,kind,scope,wdot,std_error,start,end\n";
  auto row = [&](const TerminalSlope& s, const char* scope, const SlopeEstimate& e) {
    out << num17(s.mode_freq) << ',' << s.node << ',' << s.element << ',' << kind_name(s.kind) << ',' << scope << ','
        << num17(e.wdot) << ',' << num17(e.std_error) << ',' << num17(e.window.start) << ','
        << num17(e.window.end) << '\n';
  };
  for (const auto& s : d.slopes) {
    row(s, "summary", s.slope.summary);
    for (const auto& w : s.slope.windows) row(s, "window", w);
  }
}

std::vector<TerminalSlope> read_slopes(const fs::path& dir) {
  const fs::path p = dir / "slopes.csv";
  auto in = open_stage_input(p, "def");
  std::vector<TerminalSlope> out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 9) throw IngestionError(kModule, "malformed row in " + p.string() + ": " + line);
    const SlopeEstimate e{to_double(f[5], p), to_double(f[6], p), {to_double(f[7], p), to_double(f[8], p)}};
    if (f[4] == "summary") {
      TerminalSlope s;
      s.mode_freq = to_double(f[0], p);
      s.node = f[1];
      s.element = f[2];
      s.kind = f[3] == "line" ? ElementKind::Line : ElementKind::Shunt;
      s.slope.summary = e;
      out.push_back(std::move(s));
    } else if (f[4] == "window") {
      if (out.empty()) throw IngestionError(kModule, "window row before its summary in " + p.string());
      out.back().slope.windows.push_back(e);
    } else {
      throw IngestionError(kModule, "unknown scope '" + f[4] + "' in " + p.string());
    }
  }
  return out;
}

void stage_modes(const AnalysisConfig& cfg, const fs::path& dir) {
  cfg.validate();
  fs::create_directories(dir);
  const Dataset ds = load_analysis_dataset(cfg);
  const ModesResult m = run_modes(ds, cfg);
  AnalysisConfig resolved = cfg;
  resolved.ref_node = m.ref_node;
  {
    auto out = open_out(dir / "resolved_config.txt");
    write_config(out, resolved);
  }
  {
    auto out = open_out(dir / "topology.txt");
    write_topology(out, ds.topology);
  }
  write_modes(dir, m);
}

void stage_def(const AnalysisConfig& cfg, const fs::path& dir, std::optional<double> mode) {
  cfg.validate();
  const ModesResult m = read_modes(dir);
  const Dataset ds = load_analysis_dataset(cfg);
  const DefResult d = run_def(ds, cfg, m.reference, select_modes(m.modes, mode));
  write_def(dir, d);
}

std::string stage_graph(const AnalysisConfig& cfg, const fs::path& dir) {
  cfg.validate();
  const ModesResult m = read_modes(dir);
  const std::vector<TerminalSlope> slopes = read_slopes(dir);
  const Topology topo = graph_topology(cfg, dir);
  const std::vector<ModeGraph> graphs = run_graph(topo, m.modes, slopes, cfg);
  for (const auto& g : graphs) {
    auto out = open_out(dir / (mode_tag(g.mode.freq) + ".gv"));
    out << export_graph(g, topo).dot;
  }
  const nlohmann::json r = make_report(cfg, m, slopes, graphs, topo);
  auto out = open_out(dir / "report.json");
  out << r.dump(2) << '\n';
  return r["status"];
}

std::string stage_analyze(const AnalysisConfig& cfg, const fs::path& dir) {
  stage_modes(cfg, dir);
  stage_def(cfg, dir);
  return stage_graph(cfg, dir);
}

}  // namespace deftrace
