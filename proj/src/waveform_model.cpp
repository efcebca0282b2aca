#include "deftrace/waveform_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "deftrace/error.hpp"

namespace deftrace {

namespace {

constexpr const char* kModule = "waveform_model";

// Index tolerance, in samples, when mapping times onto the sampling grid.
constexpr double kGridTol = 1e-6;

bool valid_id(const std::string& id) {
  if (id.empty()) return false;
  return std::none_of(id.begin(), id.end(), [](char ch) {
    return ch == ':' || ch == ',' || ch == '#' || std::isspace(static_cast<unsigned char>(ch));
  });
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

void append_number(std::string& out, double x, int digits) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, digits);
  out.append(buf, res.ptr);
}

}  // namespace

// ---------------------------------------------------------------- SampleSeries

SampleSeries::SampleSeries(std::vector<double> values, double fs, double t0)
    : values_(std::move(values)), fs_(fs), t0_(t0) {
  if (!(fs_ > 0.0) || !std::isfinite(fs_)) throw ConfigError(kModule, "sampling rate must be > 0");
  if (!std::isfinite(t0_)) throw ConfigError(kModule, "start time must be finite");
  if (values_.size() < 2) throw InsufficientDataError(kModule, "series needs at least 2 samples");
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) throw DataQualityError(kModule, "non-finite sample", k);
  }
}

bool SampleSeries::aligned_with(const SampleSeries& other) const {
  if (size() != other.size()) return false;
  if (std::abs(fs_ - other.fs_) > 1e-9 * fs_) return false;
  return std::abs(t0_ - other.t0_) <= 1e-6 / fs_;
}

ThreePhaseSignal::ThreePhaseSignal(SampleSeries a, SampleSeries b, SampleSeries c)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
  if (!a_.aligned_with(b_) || !a_.aligned_with(c_)) {
    throw AlignmentError(kModule, "phase channels do not share one sampling grid");
  }
}

// -------------------------------------------------------------------- Topology

Topology::Topology(std::vector<std::string> nodes, std::vector<Edge> edges,
                   std::vector<ShuntElement> shunts)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), shunts_(std::move(shunts)) {
  std::unordered_set<std::string> node_set;
  for (const auto& n : nodes_) {
    if (!valid_id(n)) throw IngestionError(kModule, "invalid node id '" + n + "'");
    if (!node_set.insert(n).second) throw IngestionError(kModule, "duplicate node id '" + n + "'");
  }
  std::unordered_set<std::string> element_set;
  for (const auto& e : edges_) {
    if (!valid_id(e.id)) throw IngestionError(kModule, "invalid edge id '" + e.id + "'");
    if (!element_set.insert(e.id).second) {
      throw IngestionError(kModule, "duplicate element id '" + e.id + "'");
    }
    if (!node_set.count(e.node_i) || !node_set.count(e.node_j)) {
      throw IngestionError(kModule, "edge '" + e.id + "' references an unknown node");
    }
    if (e.node_i == e.node_j) throw IngestionError(kModule, "edge '" + e.id + "' is a self-loop");
  }
  for (const auto& s : shunts_) {
    if (!valid_id(s.id)) throw IngestionError(kModule, "invalid shunt id '" + s.id + "'");
    if (!element_set.insert(s.id).second) {
      throw IngestionError(kModule, "duplicate element id '" + s.id + "'");
    }
    if (!node_set.count(s.node)) {
      throw IngestionError(kModule, "shunt '" + s.id + "' references unknown node '" + s.node + "'");
    }
  }
}

bool Topology::has_node(const std::string& id) const {
  return std::find(nodes_.begin(), nodes_.end(), id) != nodes_.end();
}

const Edge* Topology::find_edge(const std::string& id) const {
  auto it = std::find_if(edges_.begin(), edges_.end(), [&](const Edge& e) { return e.id == id; });
  return it == edges_.end() ? nullptr : &*it;
}

const ShuntElement* Topology::find_shunt(const std::string& id) const {
  auto it = std::find_if(shunts_.begin(), shunts_.end(),
                         [&](const ShuntElement& s) { return s.id == id; });
  return it == shunts_.end() ? nullptr : &*it;
}

std::optional<ElementKind> Topology::element_kind(const std::string& id) const {
  if (find_edge(id)) return ElementKind::Line;
  if (find_shunt(id)) return ElementKind::Shunt;
  return std::nullopt;
}

bool Topology::is_incident(const std::string& node, const std::string& element) const {
  if (const Edge* e = find_edge(element)) return e->node_i == node || e->node_j == node;
  if (const ShuntElement* s = find_shunt(element)) return s->node == node;
  return false;
}

const std::string& Topology::far_end(const Edge& e, const std::string& node) const {
  return e.node_i == node ? e.node_j : e.node_i;
}

std::vector<const Edge*> Topology::edges_at(const std::string& node) const {
  std::vector<const Edge*> out;
  for (const auto& e : edges_) {
    if (e.node_i == node || e.node_j == node) out.push_back(&e);
  }
  return out;
}

std::vector<const ShuntElement*> Topology::shunts_at(const std::string& node) const {
  std::vector<const ShuntElement*> out;
  for (const auto& s : shunts_) {
    if (s.node == node) out.push_back(&s);
  }
  return out;
}

TerminalMeasurement::TerminalMeasurement(std::string node_, std::string element_, ElementKind kind_,
                                         ThreePhaseSignal v_, ThreePhaseSignal i_)
    : node(std::move(node_)),
      element(std::move(element_)),
      kind(kind_),
      v(std::move(v_)),
      i(std::move(i_)) {
  if (!v.a().aligned_with(i.a())) {
    throw AlignmentError(kModule, "voltage and current of terminal " + key() + " are not time-aligned");
  }
}

const TerminalMeasurement* Dataset::find(const std::string& node, const std::string& element) const {
  for (const auto& t : terminals) {
    if (t.node == node && t.element == element) return &t;
  }
  return nullptr;
}

// ------------------------------------------------------------------ topology io

Topology parse_topology(std::istream& in) {
  std::vector<std::string> nodes;
  std::vector<Edge> edges;
  std::vector<ShuntElement> shunts;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw)) continue;
    std::vector<std::string> args;
    for (std::string tok; ls >> tok;) args.push_back(tok);
    auto expect = [&](std::size_t n) {
      if (args.size() != n) {
        throw IngestionError(kModule, "topology line " + std::to_string(lineno) + ": '" + kw +
                                          "' expects " + std::to_string(n) + " fields");
      }
    };
    if (kw == "node") {
      expect(1);
      nodes.push_back(args[0]);
    } else if (kw == "edge") {
      expect(3);
      edges.push_back({args[0], args[1], args[2]});
    } else if (kw == "shunt") {
      expect(2);
      shunts.push_back({args[0], args[1]});
    } else {
      throw IngestionError(kModule,
                           "topology line " + std::to_string(lineno) + ": unknown keyword '" + kw + "'");
    }
  }
  return Topology(std::move(nodes), std::move(edges), std::move(shunts));
}

void write_topology(std::ostream& out, const Topology& topo) {
  for (const auto& n : topo.nodes()) out << "node " << n << '\n';
  for (const auto& e : topo.edges()) out << "edge " << e.id << ' ' << e.node_i << ' ' << e.node_j << '\n';
  for (const auto& s : topo.shunts()) out << "shunt " << s.id << ' ' << s.node << '\n';
}

// ------------------------------------------------------------------ waveform io

namespace {

struct ChannelName {
  bool voltage = false;
  std::string node;
  std::string element;
  int phase = 0;  // 0,1,2 = a,b,c
};

ChannelName parse_channel_name(const std::string& name) {
  auto parts = split(name, ':');
  auto phase_of = [&](std::string_view p) {
    if (p == "a") return 0;
    if (p == "b") return 1;
    if (p == "c") return 2;
    throw IngestionError(kModule, "channel '" + name + "' has an invalid phase suffix");
  };
  ChannelName ch;
  if (parts.size() == 3 && parts[0] == "V") {
    ch.voltage = true;
    ch.node = std::string(parts[1]);
    ch.phase = phase_of(parts[2]);
  } else if (parts.size() == 4 && parts[0] == "I") {
    ch.node = std::string(parts[1]);
    ch.element = std::string(parts[2]);
    ch.phase = phase_of(parts[3]);
  } else {
    throw IngestionError(kModule, "unrecognised channel name '" + name + "'");
  }
  return ch;
}

const char* phase_suffix(int p) { return p == 0 ? "a" : (p == 1 ? "b" : "c"); }

}  // namespace

Dataset parse_dataset(std::istream& waveform, Topology topo) {
  std::string unit = "pu";
  std::string line;
  std::vector<std::string> header;
  // Metadata comments precede the header row.
  while (std::getline(waveform, line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      auto colon = t.find(':');
      if (colon != std::string::npos) {
        std::string key = trim(std::string_view(t).substr(1, colon - 1));
        std::string val = trim(std::string_view(t).substr(colon + 1));
        if (key == "unit") unit = val;
      }
      continue;
    }
    for (auto f : split(t, ',')) header.push_back(trim(f));
    break;
  }
  if (header.empty() || header[0] != "time") {
    throw IngestionError(kModule, "waveform header must start with 'time'");
  }
  const std::size_t ncol = header.size();
  std::vector<ChannelName> names;
  std::map<std::string, std::size_t> column_of;
  for (std::size_t c = 1; c < ncol; ++c) {
    names.push_back(parse_channel_name(header[c]));
    if (!column_of.emplace(header[c], c).second) {
      throw IngestionError(kModule, "duplicate channel '" + header[c] + "'");
    }
  }

  std::vector<std::vector<double>> cols(ncol);
  std::size_t row = 0;
  while (std::getline(waveform, line)) {
    std::string_view sv(line);
    while (!sv.empty() && (sv.back() == '\r' || sv.back() == ' ')) sv.remove_suffix(1);
    if (sv.empty() || sv.front() == '#') continue;
    auto fields = split(sv, ',');
    if (fields.size() != ncol) {
      throw AlignmentError(kModule, "row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                                        " fields, expected " + std::to_string(ncol));
    }
    for (std::size_t c = 0; c < ncol; ++c) {
      auto f = fields[c];
      while (!f.empty() && f.front() == ' ') f.remove_prefix(1);
      double x = 0.0;
      auto res = std::from_chars(f.data(), f.data() + f.size(), x);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        // from_chars rejects a few spellings of non-finite values; treat
        // anything unparsable that looks like one as a quality problem.
        std::string lower(f);
        std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
        if (lower.find("nan") != std::string::npos || lower.find("inf") != std::string::npos) {
          x = std::numeric_limits<double>::quiet_NaN();
        } else {
          throw IngestionError(kModule, "unparsable value '" + std::string(f) + "' in column '" +
                                            header[c] + "' row " + std::to_string(row));
        }
      }
      if (!std::isfinite(x)) {
        throw DataQualityError(kModule, "non-finite value in channel '" + header[c] + "'", row);
      }
      cols[c].push_back(x);
    }
    ++row;
  }
  if (row < 2) throw InsufficientDataError(kModule, "waveform file has fewer than 2 samples");

  const auto& time = cols[0];
  const double t0 = time.front();
  const double span = time.back() - t0;
  if (!(span > 0.0)) throw AlignmentError(kModule, "time column is not increasing");
  double fs = static_cast<double>(row - 1) / span;
  if (std::abs(fs - std::round(fs)) < 1e-9 * fs) fs = std::round(fs);
  for (std::size_t k = 0; k < row; ++k) {
    double expected = t0 + static_cast<double>(k) / fs;
    if (std::abs(time[k] - expected) * fs > 0.01) {
      throw AlignmentError(kModule, "non-uniform sampling grid at sample " + std::to_string(k));
    }
  }

  auto series = [&](const std::string& name) -> SampleSeries {
    auto it = column_of.find(name);
    if (it == column_of.end()) throw IngestionError(kModule, "missing channel '" + name + "'");
    return SampleSeries(cols[it->second], fs, t0);
  };
  auto three_phase = [&](const std::string& prefix) {
    return ThreePhaseSignal(series(prefix + ":a"), series(prefix + ":b"), series(prefix + ":c"));
  };

  // Validate every current channel against the topology before assembling.
  std::set<std::pair<std::string, std::string>> current_groups;
  for (const auto& ch : names) {
    if (!topo.has_node(ch.node)) {
      throw IngestionError(kModule, "channel references unknown node '" + ch.node + "'");
    }
    if (ch.voltage) continue;
    if (!topo.element_kind(ch.element)) {
      throw IngestionError(kModule, "channel references unknown element '" + ch.element + "'");
    }
    if (!topo.is_incident(ch.node, ch.element)) {
      throw IngestionError(kModule, "element '" + ch.element + "' is not incident to node '" + ch.node + "'");
    }
    current_groups.insert({ch.node, ch.element});
  }

  Dataset ds{std::move(topo), {}, unit, {}, {}};
  const Topology& tp = ds.topology;
  auto add_terminal = [&](const std::string& node, const std::string& element, ElementKind kind) {
    ds.terminals.emplace_back(node, element, kind, three_phase("V:" + node),
                              three_phase("I:" + node + ":" + element));
  };
  for (const auto& e : tp.edges()) {
    int ends = 0;
    for (const auto* n : {&e.node_i, &e.node_j}) {
      if (current_groups.count({*n, e.id})) {
        add_terminal(*n, e.id, ElementKind::Line);
        ++ends;
      }
    }
    if (ends == 1) ds.partially_observed_edges.push_back(e.id);
    if (ends == 0) ds.unobserved_edges.push_back(e.id);
  }
  for (const auto& s : tp.shunts()) {
    if (!current_groups.count({s.node, s.id})) {
      throw IngestionError(kModule, std::string("missing channel 'I:") + s.node + ":" + s.id + ":a'");
    }
    add_terminal(s.node, s.id, ElementKind::Shunt);
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& waveform_file,
                     const std::filesystem::path& topology_file) {
  std::ifstream tf(topology_file);
  if (!tf) throw IngestionError(kModule, "cannot open topology file " + topology_file.string());
  Topology topo = parse_topology(tf);
  std::ifstream wf(waveform_file);
  if (!wf) throw IngestionError(kModule, "cannot open waveform file " + waveform_file.string());
  return parse_dataset(wf, std::move(topo));
}

void write_waveforms(std::ostream& out, const Dataset& ds, int digits) {
  if (ds.terminals.empty()) throw ConfigError(kModule, "dataset has no terminals to write");
  std::vector<std::string> names;
  std::vector<const SampleSeries*> cols;
  std::set<std::string> voltage_written;
  for (const auto& n : ds.topology.nodes()) {
    for (const auto& t : ds.terminals) {
      if (t.node != n || voltage_written.count(n)) continue;
      voltage_written.insert(n);
      const SampleSeries* ph[3] = {&t.v.a(), &t.v.b(), &t.v.c()};
      for (int p = 0; p < 3; ++p) {
        names.push_back("V:" + n + ":" + phase_suffix(p));
        cols.push_back(ph[p]);
      }
    }
  }
  for (const auto& t : ds.terminals) {
    const SampleSeries* ph[3] = {&t.i.a(), &t.i.b(), &t.i.c()};
    for (int p = 0; p < 3; ++p) {
      names.push_back("I:" + t.node + ":" + t.element + ":" + phase_suffix(p));
      cols.push_back(ph[p]);
    }
  }
  const SampleSeries& ref = *cols.front();
  out << "# unit: " << ds.unit << '\n';
  out << "# precision: " << digits << '\n';
  out << "time";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  std::string buf;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    buf.clear();
    append_number(buf, ref.time(k), std::max(digits, 15));
    for (const auto* c : cols) {
      buf.push_back(',');
      append_number(buf, (*c)[k], digits);
    }
    buf.push_back('\n');
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

void write_dataset(const Dataset& ds, const std::filesystem::path& waveform_file,
                   const std::filesystem::path& topology_file, int digits) {
  std::ofstream tf(topology_file);
  if (!tf) throw IngestionError(kModule, "cannot write " + topology_file.string());
  write_topology(tf, ds.topology);
  std::ofstream wf(waveform_file);
  if (!wf) throw IngestionError(kModule, "cannot write " + waveform_file.string());
  write_waveforms(wf, ds, digits);
}

// ------------------------------------------------------------------ time_slice

std::pair<std::size_t, std::size_t> slice_indices(const SampleSeries& s, double start, double end) {
  const double x0 = (start - s.t0()) * s.fs();
  const double x1 = (end - s.t0()) * s.fs();
  const double n = static_cast<double>(s.size());
  if (!(end > start) || x0 < -kGridTol || x1 > n + kGridTol) {
    throw RangeError(kModule, "slice [" + std::to_string(start) + ", " + std::to_string(end) +
                                  ") outside recording span [" + std::to_string(s.span().start) + ", " +
                                  std::to_string(s.span().end) + ")");
  }
  auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(x0 - kGridTol)));
  auto last = static_cast<std::size_t>(std::min(n, std::ceil(x1 - kGridTol)));
  if (last < first + 2) throw RangeError(kModule, "slice shorter than 2 samples");
  return {first, last};
}

SampleSeries time_slice(const SampleSeries& s, double start, double end) {
  auto [first, last] = slice_indices(s, start, end);
  std::vector<double> v(s.values().begin() + static_cast<std::ptrdiff_t>(first),
                        s.values().begin() + static_cast<std::ptrdiff_t>(last));
  return SampleSeries(std::move(v), s.fs(), s.time(first));
}

ThreePhaseSignal time_slice(const ThreePhaseSignal& x, double start, double end) {
  return ThreePhaseSignal(time_slice(x.a(), start, end), time_slice(x.b(), start, end),
                          time_slice(x.c(), start, end));
}

TerminalMeasurement time_slice(const TerminalMeasurement& m, double start, double end) {
  return TerminalMeasurement(m.node, m.element, m.kind, time_slice(m.v, start, end),
                             time_slice(m.i, start, end));
}

Dataset time_slice(const Dataset& ds, double start, double end) {
  Dataset out{ds.topology, {}, ds.unit, ds.partially_observed_edges, ds.unobserved_edges};
  out.terminals.reserve(ds.terminals.size());
  for (const auto& t : ds.terminals) out.terminals.push_back(time_slice(t, start, end));
  return out;
}

}  // namespace deftrace
