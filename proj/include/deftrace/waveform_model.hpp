#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace deftrace {

// Half-open time interval [start, end) in seconds.
struct TimeSpan {
  double start = 0.0;
  double end = 0.0;
  double length() const { return end - start; }
};

// Uniformly sampled real channel. Immutable after construction.
class SampleSeries {
 public:
  SampleSeries(std::vector<double> values, double fs, double t0 = 0.0);

  std::span<const double> values() const { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }
  std::size_t size() const { return values_.size(); }
  double fs() const { return fs_; }
  double t0() const { return t0_; }
  double dt() const { return 1.0 / fs_; }
  double time(std::size_t k) const { return t0_ + static_cast<double>(k) / fs_; }
  // Covered span [t0, t0 + n/fs).
  TimeSpan span() const { return {t0_, t0_ + static_cast<double>(values_.size()) / fs_}; }
  double duration() const { return static_cast<double>(values_.size()) / fs_; }

  // Same grid and length.
  bool aligned_with(const SampleSeries& other) const;

 private:
  std::vector<double> values_;
  double fs_;
  double t0_;
};

class ThreePhaseSignal {
 public:
  ThreePhaseSignal(SampleSeries a, SampleSeries b, SampleSeries c);

  const SampleSeries& a() const { return a_; }
  const SampleSeries& b() const { return b_; }
  const SampleSeries& c() const { return c_; }
  std::size_t size() const { return a_.size(); }
  double fs() const { return a_.fs(); }
  double t0() const { return a_.t0(); }
  TimeSpan span() const { return a_.span(); }

 private:
  SampleSeries a_, b_, c_;
};

enum class ElementKind { Line, Shunt };

struct Edge {
  std::string id;
  std::string node_i;
  std::string node_j;
};

struct ShuntElement {
  std::string id;
  std::string node;
};

// Network graph: nodes, line edges, and shunt elements (generators,
// compensators, loads). Ids keep declaration order.
class Topology {
 public:
  Topology(std::vector<std::string> nodes, std::vector<Edge> edges,
           std::vector<ShuntElement> shunts);

  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<ShuntElement>& shunts() const { return shunts_; }

  bool has_node(const std::string& id) const;
  const Edge* find_edge(const std::string& id) const;
  const ShuntElement* find_shunt(const std::string& id) const;
  std::optional<ElementKind> element_kind(const std::string& id) const;
  bool is_incident(const std::string& node, const std::string& element) const;
  // Node on the other end of a line seen from `node`.
  const std::string& far_end(const Edge& e, const std::string& node) const;
  std::vector<const Edge*> edges_at(const std::string& node) const;
  std::vector<const ShuntElement*> shunts_at(const std::string& node) const;

 private:
  std::vector<std::string> nodes_;
  std::vector<Edge> edges_;
  std::vector<ShuntElement> shunts_;
};

// Voltage at `node` and current on `element`.
//
// Direction convention for the current channel:
//   line terminal  - current flowing out of `node` into the line;
//   shunt terminal - current the element injects into `node`.
// With this convention a positive DEF slope always means oscillation energy
// leaving the measured device towards the rest of the network.
struct TerminalMeasurement {
  std::string node;
  std::string element;
  ElementKind kind = ElementKind::Line;
  ThreePhaseSignal v;
  ThreePhaseSignal i;

  TerminalMeasurement(std::string node, std::string element, ElementKind kind,
                      ThreePhaseSignal v, ThreePhaseSignal i);

  std::string key() const { return node + ":" + element; }
};

struct Dataset {
  Topology topology;
  std::vector<TerminalMeasurement> terminals;
  std::string unit = "pu";
  // Lines measured at one end only; the two-end consistency check is
  // unavailable for them.
  std::vector<std::string> partially_observed_edges;
  // Lines with no measured end.
  std::vector<std::string> unobserved_edges;

  const TerminalMeasurement* find(const std::string& node, const std::string& element) const;
};

// Topology file: `node <id>`, `edge <id> <node_i> <node_j>`, `shunt <id> <node>`.
Topology parse_topology(std::istream& in);
void write_topology(std::ostream& out, const Topology& topo);

// Parses the columnar waveform file and binds it to `topo`.
Dataset parse_dataset(std::istream& waveform, Topology topo);
Dataset load_dataset(const std::filesystem::path& waveform_file,
                     const std::filesystem::path& topology_file);

// Writes the waveform table with `digits` significant digits.
void write_waveforms(std::ostream& out, const Dataset& ds, int digits = 12);
void write_dataset(const Dataset& ds, const std::filesystem::path& waveform_file,
                   const std::filesystem::path& topology_file, int digits = 12);

// Sample index range [first, last) covering [start, end) on the grid of `s`.
std::pair<std::size_t, std::size_t> slice_indices(const SampleSeries& s, double start, double end);

SampleSeries time_slice(const SampleSeries& s, double start, double end);
ThreePhaseSignal time_slice(const ThreePhaseSignal& x, double start, double end);
TerminalMeasurement time_slice(const TerminalMeasurement& m, double start, double end);
Dataset time_slice(const Dataset& ds, double start, double end);

}  // namespace deftrace
