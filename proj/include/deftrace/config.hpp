#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "deftrace/waveform_model.hpp"

namespace deftrace {

// Threshold given either as an absolute energy rate or as a fraction of the
// largest |Wdot| in its population (written with a `rel` suffix, e.g. 0.05rel).
struct Threshold {
  double value = 0.0;
  bool relative = false;

  static Threshold parse(const std::string& text);
  std::string to_string() const;
  double resolve(double max_abs) const { return relative ? value * max_abs : value; }
};

enum class DetrendMode { Mean, Lowpass };

struct AnalysisConfig {
  double f0 = 60.0;
  std::string ref_node;  // empty: first node in topology order
  std::optional<TimeSpan> analysis_window;  // empty: whole record
  double reference_span = 1.0;  // s of the reference node voltage used for theta0

  // mode_id
  double psd_segment = 1.0;  // s
  double psd_overlap = 0.5;
  double min_prominence_db = 10.0;
  int max_modes = 5;
  double min_mode_freq = 5.0;
  double max_mode_freq = 0.0;  // 0: Nyquist
  double dynamic_range_db = 40.0;
  double mode_floor_db = 100.0;  // modes weaker than this below the total dq power are ignored

  // mode_filter
  double band_halfwidth = 0.0;  // 0: max(2 Hz, 0.1 f)
  int filter_order = 4;
  DetrendMode detrend = DetrendMode::Mean;
  double detrend_fc = 1.0;

  // def_engine / interaction_graph
  double t_win = 0.5;
  Threshold eps_edge{0.05, true};
  Threshold eps_node{0.05, true};

  std::string data_file;
  std::string topology_file;

  void validate() const;
};

// key = value lines, `#` comments. Unknown keys are a configuration error.
AnalysisConfig parse_config(std::istream& in);
AnalysisConfig load_config(const std::filesystem::path& path);
void apply_config_entry(AnalysisConfig& cfg, const std::string& key, const std::string& value);
void write_config(std::ostream& out, const AnalysisConfig& cfg);

TimeSpan parse_window(const std::string& text);

}  // namespace deftrace
