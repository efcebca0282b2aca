#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "deftrace/config.hpp"
#include "deftrace/def_engine.hpp"
#include "deftrace/mode_id.hpp"
#include "deftrace/waveform_model.hpp"

namespace deftrace {

enum class Label { Source, Sink, Neutral };

const char* to_string(Label l);

// Summary slope per terminal, keyed by (node, element).
using SlopeTable = std::map<std::pair<std::string, std::string>, SlopeEstimate>;

struct DirectedEdge {
  std::string from;
  std::string to;
  std::string edge;
  double wdot = 0.0;         // magnitude at the deciding end
  std::string decided_at;    // node whose terminal decided the direction
};

struct ModeGraph {
  Mode mode;
  std::vector<DirectedEdge> directed_edges;
  std::map<std::string, Label> node_labels;
  std::map<std::string, Label> element_labels;  // shunt elements and doubly measured lines
  std::map<std::string, double> shunt_slopes;   // injection into the network
  std::map<std::string, double> node_net;       // net outward injection of each node
  std::map<std::string, double> line_absorption;  // sum of both-end outward slopes, > 0 absorbing
  std::vector<std::string> below_threshold_edges;
  std::vector<std::string> unresolved_edges;     // no measured end
  std::vector<std::string> single_ended_edges;   // two-end check unavailable
  std::vector<std::string> warnings;
  double eps_edge = 0.0;  // resolved absolute thresholds
  double eps_node = 0.0;
};

// Directed energy-flow graph of one mode. For a line measured at both ends
// the lower-stderr end decides; opposing verdicts raise a warning.
ModeGraph build_mode_graph(const SlopeTable& slopes, const Topology& topo, double eps_edge, const Mode& mode = {});
ModeGraph build_mode_graph(const SlopeTable& slopes, const Topology& topo, const Threshold& eps_edge,
                           const Mode& mode = {});

// Net-outward classification of shunt elements, nodes and doubly measured
// lines. Fills the label, net and absorption maps of `g`.
void classify_nodes(ModeGraph& g, const SlopeTable& slopes, const Topology& topo, double eps_node);
void classify_nodes(ModeGraph& g, const SlopeTable& slopes, const Topology& topo, const Threshold& eps_node);

struct GraphExport {
  std::string dot;
  nlohmann::json record;
};

GraphExport export_graph(const ModeGraph& g, const Topology& topo);

// File stem used for per-mode artifacts, e.g. "25" or "47.5".
std::string mode_tag(double freq);

}  // namespace deftrace
