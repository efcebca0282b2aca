#include "deftrace/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "deftrace/error.hpp"

namespace deftrace {

namespace {

constexpr const char* kModule = "config";

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
  double x = 0.0;
  auto t = trim(text);
  auto res = std::from_chars(t.data(), t.data() + t.size(), x);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(x)) {
    throw ConfigError(kModule, "'" + key + "' expects a number, got '" + text + "'");
  }
  return x;
}

int parse_int(const std::string& key, const std::string& text) {
  int x = 0;
  auto t = trim(text);
  auto res = std::from_chars(t.data(), t.data() + t.size(), x);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError(kModule, "'" + key + "' expects an integer, got '" + text + "'");
  }
  return x;
}

std::string fmt(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace

Threshold Threshold::parse(const std::string& text) {
  std::string t = trim(text);
  Threshold th;
  if (t.size() > 3 && t.compare(t.size() - 3, 3, "rel") == 0) {
    th.relative = true;
    t.resize(t.size() - 3);
  }
  th.value = parse_double("threshold", t);
  if (th.value < 0.0) throw ConfigError(kModule, "thresholds must be >= 0");
  return th;
}

std::string Threshold::to_string() const { return fmt(value) + (relative ? "rel" : ""); }

TimeSpan parse_window(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw ConfigError(kModule, "window must be written as <start>:<end>, got '" + text + "'");
  }
  TimeSpan w{parse_double("window", text.substr(0, colon)), parse_double("window", text.substr(colon + 1))};
  if (!(w.end > w.start)) throw ConfigError(kModule, "window end must exceed start");
  return w;
}

void AnalysisConfig::validate() const {
  if (!(f0 > 0.0)) throw ConfigError(kModule, "f0 must be > 0");
  if (!(t_win > 0.0)) throw ConfigError(kModule, "t_win must be > 0");
  if (eps_edge.value < 0.0 || eps_node.value < 0.0) throw ConfigError(kModule, "thresholds must be >= 0");
  if (!(reference_span > 0.0)) throw ConfigError(kModule, "reference_span must be > 0");
  if (!(psd_segment > 0.0)) throw ConfigError(kModule, "psd_segment must be > 0");
  if (psd_overlap < 0.0 || psd_overlap >= 1.0) throw ConfigError(kModule, "psd_overlap must be in [0, 1)");
  if (!(min_prominence_db > 0.0)) throw ConfigError(kModule, "min_prominence_db must be > 0");
  if (max_modes < 1) throw ConfigError(kModule, "max_modes must be >= 1");
  if (min_mode_freq < 0.0 || max_mode_freq < 0.0) throw ConfigError(kModule, "mode frequency limits must be >= 0");
  if (dynamic_range_db <= 0.0) throw ConfigError(kModule, "dynamic_range_db must be > 0");
  if (!(mode_floor_db > 0.0)) throw ConfigError(kModule, "mode_floor_db must be > 0");
  if (band_halfwidth < 0.0) throw ConfigError(kModule, "band_halfwidth must be >= 0");
  if (filter_order < 1 || filter_order > 12) throw ConfigError(kModule, "filter_order must be in [1, 12]");
  if (detrend == DetrendMode::Lowpass && !(detrend_fc > 0.0)) {
    throw ConfigError(kModule, "detrend_fc must be > 0");
  }
}

void apply_config_entry(AnalysisConfig& cfg, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "f0") cfg.f0 = parse_double(key, v);
  else if (key == "ref_node") cfg.ref_node = v;
  else if (key == "window") {
    if (v.empty() || v == "all") cfg.analysis_window.reset();
    else cfg.analysis_window = parse_window(v);
  }
  else if (key == "reference_span") cfg.reference_span = parse_double(key, v);
  else if (key == "psd_segment") cfg.psd_segment = parse_double(key, v);
  else if (key == "psd_overlap") cfg.psd_overlap = parse_double(key, v);
  else if (key == "min_prominence_db") cfg.min_prominence_db = parse_double(key, v);
  else if (key == "max_modes") cfg.max_modes = parse_int(key, v);
  else if (key == "min_mode_freq") cfg.min_mode_freq = parse_double(key, v);
  else if (key == "max_mode_freq") cfg.max_mode_freq = parse_double(key, v);
  else if (key == "dynamic_range_db") cfg.dynamic_range_db = parse_double(key, v);
  else if (key == "mode_floor_db") cfg.mode_floor_db = parse_double(key, v);
  else if (key == "band_halfwidth") cfg.band_halfwidth = parse_double(key, v);
  else if (key == "filter_order") cfg.filter_order = parse_int(key, v);
  else if (key == "detrend") {
    if (v == "mean") cfg.detrend = DetrendMode::Mean;
    else if (v == "lowpass") cfg.detrend = DetrendMode::Lowpass;
    else throw ConfigError(kModule, "detrend must be 'mean' or 'lowpass'");
  }
  else if (key == "detrend_fc") cfg.detrend_fc = parse_double(key, v);
  else if (key == "t_win") cfg.t_win = parse_double(key, v);
  else if (key == "eps_edge") cfg.eps_edge = Threshold::parse(v);
  else if (key == "eps_node") cfg.eps_node = Threshold::parse(v);
  else if (key == "data") cfg.data_file = v;
  else if (key == "topology") cfg.topology_file = v;
  else throw ConfigError(kModule, "unknown configuration key '" + key + "'");
}

AnalysisConfig parse_config(std::istream& in) {
  AnalysisConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(kModule, "line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_config_entry(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

AnalysisConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(kModule, "cannot open config file " + path.string());
  return parse_config(in);
}

void write_config(std::ostream& out, const AnalysisConfig& cfg) {
  out << "f0 = " << fmt(cfg.f0) << '\n';
  out << "ref_node = " << cfg.ref_node << '\n';
  out << "window = ";
  if (cfg.analysis_window) out << fmt(cfg.analysis_window->start) << ':' << fmt(cfg.analysis_window->end);
  else out << "all";
  out << '\n';
  out << "reference_span = " << fmt(cfg.reference_span) << '\n';
  out << "psd_segment = " << fmt(cfg.psd_segment) << '\n';
  out << "psd_overlap = " << fmt(cfg.psd_overlap) << '\n';
  out << "min_prominence_db = " << fmt(cfg.min_prominence_db) << '\n';
  out << "max_modes = " << cfg.max_modes << '\n';
  out << "min_mode_freq = " << fmt(cfg.min_mode_freq) << '\n';
  out << "max_mode_freq = " << fmt(cfg.max_mode_freq) << '\n';
  out << "dynamic_range_db = " << fmt(cfg.dynamic_range_db) << '\n';
  out << "mode_floor_db = " << fmt(cfg.mode_floor_db) << '\n';
  out << "band_halfwidth = " << fmt(cfg.band_halfwidth) << '\n';
  out << "filter_order = " << cfg.filter_order << '\n';
  out << "detrend = " << (cfg.detrend == DetrendMode::Mean ? "mean" : "lowpass") << '\n';
  out << "detrend_fc = " << fmt(cfg.detrend_fc) << '\n';
  out << "t_win = " << fmt(cfg.t_win) << '\n';
  out << "eps_edge = " << cfg.eps_edge.to_string() << '\n';
  out << "eps_node = " << cfg.eps_node.to_string() << '\n';
  out << "data = " << cfg.data_file << '\n';
  out << "topology = " << cfg.topology_file << '\n';
}

}  // namespace deftrace
