#include "deftrace/interaction_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <tuple>

namespace deftrace {

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

Label label_of(double value, double eps) {
  if (value > eps) return Label::Source;
  if (value < -eps) return Label::Sink;
  return Label::Neutral;
}

const SlopeEstimate* find_slope(const SlopeTable& slopes, const std::string& node, const std::string& element) {
  auto it = slopes.find({node, element});
  return it == slopes.end() ? nullptr : &it->second;
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

}  // namespace

const char* to_string(Label l) {
  switch (l) {
    case Label::Source: return "Source";
    case Label::Sink: return "Sink";
    case Label::Neutral: return "Neutral";
  }
  return "Neutral";
}

std::string mode_tag(double freq) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", freq);
  return buf;
}

ModeGraph build_mode_graph(const SlopeTable& slopes, const Topology& topo, double eps_edge, const Mode& mode) {
  ModeGraph g;
  g.mode = mode;
  g.eps_edge = eps_edge;
  for (const auto& e : topo.edges()) {
    const SlopeEstimate* si = find_slope(slopes, e.node_i, e.id);
    const SlopeEstimate* sj = find_slope(slopes, e.node_j, e.id);
    if (!si && !sj) {
      g.unresolved_edges.push_back(e.id);
      continue;
    }
    if (!si || !sj) g.single_ended_edges.push_back(e.id);
    if (si && sj) {
      // Outward slopes above threshold at both ends point the edge both ways.
      const bool i_out = si->wdot > eps_edge, j_out = sj->wdot > eps_edge;
      const bool i_in = si->wdot < -eps_edge, j_in = sj->wdot < -eps_edge;
      if ((i_out && j_out) || (i_in && j_in)) {
        g.warnings.push_back("edge " + e.id + ": ends disagree on direction (" + num(si->wdot) + " at " +
                             e.node_i + ", " + num(sj->wdot) + " at " + e.node_j + ")");
      }
    }
    const bool use_i = si && (!sj || si->std_error <= sj->std_error);
    const std::string& here = use_i ? e.node_i : e.node_j;
    const std::string& there = use_i ? e.node_j : e.node_i;
    const double w = use_i ? si->wdot : sj->wdot;
    if (w > eps_edge) g.directed_edges.push_back({here, there, e.id, std::abs(w), here});
    else if (w < -eps_edge) g.directed_edges.push_back({there, here, e.id, std::abs(w), here});
    else g.below_threshold_edges.push_back(e.id);
  }
  return g;
}

ModeGraph build_mode_graph(const SlopeTable& slopes, const Topology& topo, const Threshold& eps_edge,
                           const Mode& mode) {
  double max_abs = 0.0;
  for (const auto& e : topo.edges()) {
    const SlopeEstimate* si = find_slope(slopes, e.node_i, e.id);
    const SlopeEstimate* sj = find_slope(slopes, e.node_j, e.id);
    if (!si && !sj) continue;
    const bool use_i = si && (!sj || si->std_error <= sj->std_error);
    max_abs = std::max(max_abs, std::abs(use_i ? si->wdot : sj->wdot));
  }
  return build_mode_graph(slopes, topo, eps_edge.resolve(max_abs), mode);
}

namespace {

struct NetValues {
  std::map<std::string, double> shunt;
  std::map<std::string, double> node;
  std::map<std::string, double> line;
  std::vector<std::string> warnings;
};

NetValues net_values(const SlopeTable& slopes, const Topology& topo) {
  NetValues nv;
  for (const auto& s : topo.shunts()) {
    if (const auto* est = find_slope(slopes, s.node, s.id)) nv.shunt[s.id] = est->wdot;
  }
  for (const auto& e : topo.edges()) {
    const auto* si = find_slope(slopes, e.node_i, e.id);
    const auto* sj = find_slope(slopes, e.node_j, e.id);
    if (si && sj) nv.line[e.id] = si->wdot + sj->wdot;
  }
  for (const auto& n : topo.nodes()) {
    const auto lines = topo.edges_at(n);
    const auto shunts = topo.shunts_at(n);
    double line_sum = 0.0;
    std::size_t measured = 0;
    for (const auto* e : lines) {
      if (const auto* est = find_slope(slopes, n, e->id)) {
        line_sum += est->wdot;
        ++measured;
      }
    }
    bool shunts_complete = !shunts.empty();
    double shunt_sum = 0.0;
    for (const auto* s : shunts) {
      auto it = nv.shunt.find(s->id);
      if (it == nv.shunt.end()) shunts_complete = false;
      else shunt_sum += it->second;
    }
    if (!lines.empty() && measured == lines.size()) {
      nv.node[n] = line_sum;
    } else if (shunts_complete) {
      nv.node[n] = shunt_sum;
    } else if (measured > 0) {
      nv.node[n] = line_sum;
      nv.warnings.push_back("node " + n + ": net injection from a partial set of line terminals");
    }
  }
  return nv;
}

}  // namespace

void classify_nodes(ModeGraph& g, const SlopeTable& slopes, const Topology& topo, double eps_node) {
  NetValues nv = net_values(slopes, topo);
  g.eps_node = eps_node;
  g.shunt_slopes = nv.shunt;
  g.node_net = nv.node;
  g.line_absorption = nv.line;
  g.warnings.insert(g.warnings.end(), nv.warnings.begin(), nv.warnings.end());
  g.node_labels.clear();
  g.element_labels.clear();
  for (const auto& n : topo.nodes()) {
    auto it = nv.node.find(n);
    g.node_labels[n] = it == nv.node.end() ? Label::Neutral : label_of(it->second, eps_node);
  }
  for (const auto& [id, w] : nv.shunt) g.element_labels[id] = label_of(w, eps_node);
  // A line absorbing energy from the network is a sink.
  for (const auto& [id, w] : nv.line) g.element_labels[id] = label_of(-w, eps_node);
}

void classify_nodes(ModeGraph& g, const SlopeTable& slopes, const Topology& topo, const Threshold& eps_node) {
  NetValues nv = net_values(slopes, topo);
  double max_abs = 0.0;
  for (const auto* m : {&nv.shunt, &nv.node, &nv.line}) {
    for (const auto& [id, w] : *m) max_abs = std::max(max_abs, std::abs(w));
  }
  classify_nodes(g, slopes, topo, eps_node.resolve(max_abs));
}

GraphExport export_graph(const ModeGraph& g, const Topology& topo) {
  std::ostringstream dot;
  const std::string tag = mode_tag(g.mode.freq);
  dot << "digraph " << quoted("mode_" + tag + "Hz") << " {\n";
  dot << "  label=" << quoted("oscillation energy flow, mode " + tag + " Hz") << ";\n";
  dot << "  rankdir=LR;\n";
  for (const auto& n : topo.nodes()) {
    auto it = g.node_labels.find(n);
    const Label l = it == g.node_labels.end() ? Label::Neutral : it->second;
    std::string text = n + "\\n" + to_string(l);
    for (const auto* s : topo.shunts_at(n)) {
      auto ls = g.element_labels.find(s->id);
      auto ws = g.shunt_slopes.find(s->id);
      if (ls == g.element_labels.end() || ws == g.shunt_slopes.end()) continue;
      text += "\\n" + s->id + ": " + to_string(ls->second) + " (" + num(ws->second) + ")";
    }
    const char* color = l == Label::Source ? "red" : (l == Label::Sink ? "blue" : "gray");
    dot << "  " << quoted(n) << " [label=" << quoted(text) << ", color=" << color << "];\n";
  }
  std::vector<DirectedEdge> edges = g.directed_edges;
  std::sort(edges.begin(), edges.end(), [](const DirectedEdge& a, const DirectedEdge& b) {
    return std::tie(a.edge, a.from, a.to) < std::tie(b.edge, b.from, b.to);
  });
  for (const auto& e : edges) {
    std::string text = e.edge + " |Wdot|=" + num(e.wdot) + " @" + tag + "Hz";
    if (auto it = g.element_labels.find(e.edge); it != g.element_labels.end()) {
      text += std::string(" ") + to_string(it->second);
    }
    dot << "  " << quoted(e.from) << " -> " << quoted(e.to) << " [label=" << quoted(text) << "];\n";
  }
  dot << "}\n";

  nlohmann::json rec;
  rec["mode"] = {{"freq", g.mode.freq}, {"band", {g.mode.f_lo, g.mode.f_hi}}, {"prominence_db", g.mode.prominence_db}};
  rec["eps_edge"] = g.eps_edge;
  rec["eps_node"] = g.eps_node;
  rec["directed_edges"] = nlohmann::json::array();
  for (const auto& e : edges) {
    rec["directed_edges"].push_back(
        {{"from", e.from}, {"to", e.to}, {"edge", e.edge}, {"wdot", e.wdot}, {"decided_at", e.decided_at}});
  }
  rec["node_labels"] = nlohmann::json::object();
  for (const auto& [id, l] : g.node_labels) rec["node_labels"][id] = to_string(l);
  rec["element_labels"] = nlohmann::json::object();
  for (const auto& [id, l] : g.element_labels) rec["element_labels"][id] = to_string(l);
  rec["shunt_slopes"] = g.shunt_slopes;
  rec["node_net"] = g.node_net;
  rec["line_absorption"] = g.line_absorption;
  rec["below_threshold_edges"] = g.below_threshold_edges;
  rec["unresolved_edges"] = g.unresolved_edges;
  rec["single_ended_edges"] = g.single_ended_edges;
  rec["warnings"] = g.warnings;
  return {dot.str(), rec};
}

}  // namespace deftrace
