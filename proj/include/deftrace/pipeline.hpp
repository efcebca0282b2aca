#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deftrace/config.hpp"
#include "deftrace/def_engine.hpp"
#include "deftrace/dq_transform.hpp"
#include "deftrace/interaction_graph.hpp"
#include "deftrace/mode_id.hpp"
#include "deftrace/waveform_model.hpp"

namespace deftrace {

inline constexpr const char* kStatusOk = "ok";
inline constexpr const char* kStatusNoSsci = "no SSCI detected";

struct ModesResult {
  std::string unit = "pu";
  std::string ref_node;
  ParkReference reference;
  TimeSpan span;      // analysed part of the record
  Spectrum spectrum;  // sum over all dq channels
  std::vector<Mode> modes;
};

struct TerminalSlope {
  std::string node;
  std::string element;
  ElementKind kind = ElementKind::Line;
  double mode_freq = 0.0;
  SlopeSummary slope;
};

struct DefResult {
  std::vector<DefTrace> traces;  // ordered by mode, then terminal
  std::vector<TerminalSlope> slopes;
};

struct AnalysisReport {
  std::string status = kStatusOk;
  ModesResult modes;
  DefResult def;
  std::vector<ModeGraph> graphs;
  nlohmann::json json;
};

// Dataset named by the configuration, cut to its analysis window.
Dataset load_analysis_dataset(const AnalysisConfig& cfg);
Dataset apply_window(const Dataset& ds, const AnalysisConfig& cfg);

// Reference frame, summed dq spectra and mode table.
ModesResult run_modes(const Dataset& ds, const AnalysisConfig& cfg);

// Modes to analyse: all of them, or the one whose band holds `freq`.
std::vector<Mode> select_modes(const std::vector<Mode>& modes, std::optional<double> freq);

// DEF traces and slopes of every (terminal, mode) pair.
DefResult run_def(const Dataset& ds, const AnalysisConfig& cfg, const ParkReference& ref,
                  const std::vector<Mode>& modes);

SlopeTable slope_table(const std::vector<TerminalSlope>& slopes, double mode_freq);

std::vector<ModeGraph> run_graph(const Topology& topo, const std::vector<Mode>& modes,
                                 const std::vector<TerminalSlope>& slopes, const AnalysisConfig& cfg);

nlohmann::json make_report(const AnalysisConfig& cfg, const ModesResult& modes,
                           const std::vector<TerminalSlope>& slopes, const std::vector<ModeGraph>& graphs,
                           const Topology& topo);

// Whole chain in memory.
AnalysisReport run_analysis(const Dataset& ds, const AnalysisConfig& cfg);
AnalysisReport run_analysis(const AnalysisConfig& cfg);

// ------------------------------------------------------------ intermediates
// All intermediates are columnar text inside one output directory.

void write_modes(const std::filesystem::path& dir, const ModesResult& m);
ModesResult read_modes(const std::filesystem::path& dir);  // spectrum left empty
void write_def(const std::filesystem::path& dir, const DefResult& d);
std::vector<TerminalSlope> read_slopes(const std::filesystem::path& dir);

// Stage commands. Each reads the artifacts of the previous stage from `dir`.
void stage_modes(const AnalysisConfig& cfg, const std::filesystem::path& dir);
void stage_def(const AnalysisConfig& cfg, const std::filesystem::path& dir, std::optional<double> mode = {});
// Returns the report status.
std::string stage_graph(const AnalysisConfig& cfg, const std::filesystem::path& dir);
std::string stage_analyze(const AnalysisConfig& cfg, const std::filesystem::path& dir);

}  // namespace deftrace
