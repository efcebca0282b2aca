// def-tracer: oscillation energy-flow tracing from three-phase recordings.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "deftrace/config.hpp"
#include "deftrace/error.hpp"
#include "deftrace/pipeline.hpp"
#include "deftrace/synth_bench.hpp"

namespace fs = std::filesystem;
using namespace deftrace;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInsufficient = 3;

struct Overrides {
  std::string config;
  std::optional<std::string> data, topology, ref_node, window, eps_edge, eps_node;
  std::optional<double> f0, t_win, band_halfwidth;
  std::optional<int> max_modes, filter_order;
};

// Paths inside a config file are relative to the file.
std::string rebase(const std::string& path, const fs::path& base) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (base / path).lexically_normal().string();
}

AnalysisConfig resolve_config(const Overrides& o) {
  AnalysisConfig cfg;
  if (!o.config.empty()) {
    cfg = load_config(o.config);
    const fs::path base = fs::path(o.config).parent_path();
    cfg.data_file = rebase(cfg.data_file, base);
    cfg.topology_file = rebase(cfg.topology_file, base);
  }
  if (o.data) cfg.data_file = *o.data;
  if (o.topology) cfg.topology_file = *o.topology;
  if (o.ref_node) cfg.ref_node = *o.ref_node;
  if (o.window) apply_config_entry(cfg, "window", *o.window);
  if (o.eps_edge) cfg.eps_edge = Threshold::parse(*o.eps_edge);
  if (o.eps_node) cfg.eps_node = Threshold::parse(*o.eps_node);
  if (o.f0) cfg.f0 = *o.f0;
  if (o.t_win) cfg.t_win = *o.t_win;
  if (o.band_halfwidth) cfg.band_halfwidth = *o.band_halfwidth;
  if (o.max_modes) cfg.max_modes = *o.max_modes;
  if (o.filter_order) cfg.filter_order = *o.filter_order;
  cfg.validate();
  return cfg;
}

void print_modes(const fs::path& out) {
  const ModesResult m = read_modes(out);
  std::printf("reference node %s, theta0 = %.6f rad\n", m.ref_node.c_str(), m.reference.theta0);
  if (m.modes.empty()) {
    std::printf("%s\n", kStatusNoSsci);
    return;
  }
  std::printf("%10s %10s %10s %14s\n", "freq_Hz", "f_lo", "f_hi", "prominence_dB");
  for (const auto& md : m.modes) {
    std::printf("%10.3f %10.3f %10.3f %14.2f\n", md.freq, md.f_lo, md.f_hi, md.prominence_db);
  }
}

void print_slopes(const fs::path& out) {
  std::printf("%8s %8s %10s %14s %12s\n", "mode_Hz", "node", "element", "Wdot", "stderr");
  for (const auto& s : read_slopes(out)) {
    std::printf("%8.3f %8s %10s %14.6g %12.3g\n", s.mode_freq, s.node.c_str(), s.element.c_str(),
                s.slope.summary.wdot, s.slope.summary.std_error);
  }
}

void print_report(const fs::path& out) {
  std::ifstream in(out / "report.json");
  const auto r = nlohmann::json::parse(in);
  std::printf("status: %s\n", r["status"].get<std::string>().c_str());
  for (const auto& g : r["graphs"]) {
    std::printf("mode %.3f Hz\n", g["mode"]["freq"].get<double>());
    for (const auto& [id, l] : g["element_labels"].items()) {
      std::printf("  %-10s %s\n", id.c_str(), l.get<std::string>().c_str());
    }
    for (const auto& e : g["directed_edges"]) {
      std::printf("  %s -> %s via %s (%.4g)\n", e["from"].get<std::string>().c_str(),
                  e["to"].get<std::string>().c_str(), e["edge"].get<std::string>().c_str(), e["wdot"].get<double>());
    }
    for (const auto& w : g["warnings"]) std::printf("  warning: %s\n", w.get<std::string>().c_str());
  }
}

int run_synth(const std::string& scenario, std::optional<std::uint64_t> seed, std::optional<double> noise,
              const fs::path& out) {
  synth::ScenarioSpec spec;
  if (auto b = synth::builtin_scenario(scenario)) {
    spec = *b;
  } else {
    std::ifstream in(scenario);
    if (!in) {
      std::string names;
      for (const auto& n : synth::builtin_scenario_names()) names += " " + n;
      throw ConfigError("synth_bench", "scenario '" + scenario + "' is neither a file nor a builtin (" + names + " )");
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ScenarioError("synth_bench", std::string("scenario file is not valid JSON: ") + e.what());
    }
    spec = synth::scenario_from_json(j);
  }
  if (seed) spec.seed = *seed;
  if (noise) spec.noise = *noise;
  const synth::SynthResult r = synth::synthesize_scenario(spec);
  fs::create_directories(out);
  write_dataset(r.dataset, out / "waveforms.csv", out / "topology.txt");
  {
    std::ofstream f(out / "truth.json");
    f << synth::truth_to_json(r.truth).dump(2) << '\n';
  }
  {
    std::ofstream f(out / "scenario.json");
    f << synth::scenario_to_json(spec).dump(2) << '\n';
  }
  {
    AnalysisConfig cfg;
    cfg.f0 = spec.f0;
    cfg.data_file = "waveforms.csv";
    cfg.topology_file = "topology.txt";
    std::ofstream f(out / "config.txt");
    write_config(f, cfg);
  }
  std::printf("wrote scenario '%s' (%zu terminals, %zu modes) to %s\n", spec.name.c_str(),
              r.dataset.terminals.size(), spec.modes.size(), out.string().c_str());
  return kExitOk;
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Config: return kExitUsage;
    case ErrorKind::Data: return kExitData;
    case ErrorKind::InsufficientData: return kExitInsufficient;
  }
  return kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace oscillation energy flow through a network from three-phase recordings."};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config, "analysis configuration (key = value)");
  app.add_option("--data", o.data, "waveform file");
  app.add_option("--topology", o.topology, "topology file");
  app.add_option("--f0", o.f0, "nominal frequency, Hz");
  app.add_option("--ref-node", o.ref_node, "node whose voltage anchors the dq frame");
  app.add_option("--window", o.window, "analysis window start:end, s");
  app.add_option("--t-win", o.t_win, "slope window, s");
  app.add_option("--eps-edge", o.eps_edge, "edge threshold (absolute or e.g. 0.05rel)");
  app.add_option("--eps-node", o.eps_node, "node threshold (absolute or e.g. 0.05rel)");
  app.add_option("--max-modes", o.max_modes, "maximum number of modes");
  app.add_option("--band-halfwidth", o.band_halfwidth, "mode band half-width, Hz (0: default)");
  app.add_option("--filter-order", o.filter_order, "bandpass prototype order");

  std::string out_dir;
  std::optional<double> def_mode;
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise;

  auto* modes = app.add_subcommand("modes", "identify oscillation modes");
  modes->add_option("--out", out_dir, "output directory")->required();
  auto* def = app.add_subcommand("def", "DEF traces and slopes per terminal and mode");
  def->add_option("--out", out_dir, "output directory holding modes.csv")->required();
  def->add_option("--mode", def_mode, "analyse only the mode whose band holds this frequency, Hz");
  auto* graph = app.add_subcommand("graph", "energy-flow graphs and labels from cached slopes");
  graph->add_option("--out", out_dir, "output directory holding slopes.csv")->required();
  auto* analyze = app.add_subcommand("analyze", "modes, def and graph in sequence");
  analyze->add_option("--out", out_dir, "output directory")->required();
  auto* synth_cmd = app.add_subcommand("synth", "synthetic scenario with analytic truth");
  synth_cmd->add_option("--scenario", scenario, "scenario JSON file or builtin name")->required();
  synth_cmd->add_option("--seed", seed, "noise seed");
  synth_cmd->add_option("--noise", noise, "relative RMS noise per channel");
  synth_cmd->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(scenario, seed, noise, out_dir);
    const AnalysisConfig cfg = resolve_config(o);
    if (modes->parsed()) {
      stage_modes(cfg, out_dir);
      print_modes(out_dir);
    } else if (def->parsed()) {
      stage_def(cfg, out_dir, def_mode);
      print_slopes(out_dir);
    } else if (graph->parsed()) {
      stage_graph(cfg, out_dir);
      print_report(out_dir);
    } else if (analyze->parsed()) {
      stage_analyze(cfg, out_dir);
      print_report(out_dir);
    }
    return kExitOk;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
}
