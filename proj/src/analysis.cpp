#include "picosim/analysis.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "picosim/graph.hpp"

namespace pico {

using nlohmann::json;

namespace {

bool is_child(std::string_view path, std::string_view scope) {
  return path.size() > scope.size() + 1 && path.substr(0, scope.size()) == scope && path[scope.size()] == '/' &&
         path.find('/', scope.size() + 1) == std::string_view::npos;
}

bool is_under(std::string_view path, std::string_view scope) {
  return path == scope || (path.size() > scope.size() && path.substr(0, scope.size()) == scope &&
                           path[scope.size()] == '/');
}

std::vector<HierarchyEntry> children_of(const std::vector<ScopeNode>& tree, std::string_view scope) {
  bool found = false;
  std::vector<HierarchyEntry> out;
  for (const auto& n : tree) {
    if (n.path == scope) found = true;
    if (is_child(n.path, scope)) out.push_back({n.path, n.name, n.decl, n.composite, n.child_count});
  }
  if (!found) throw UnknownScope("unknown scope '" + std::string(scope) + "'");
  return out;
}

json subtree_json(const std::vector<ScopeNode>& tree, const ScopeNode& node) {
  json children = json::array();
  for (const auto& c : children_of(tree, node.path)) {
    const ScopeNode* child = nullptr;
    for (const auto& n : tree) {
      if (n.path == c.path) child = &n;
    }
    children.push_back(subtree_json(tree, *child));
  }
  return {{"path", node.path},
          {"name", node.name},
          {"decl", node.decl},
          {"kind", node.composite ? "composite" : "leaf"},
          {"children", children}};
}

}  // namespace

std::vector<HierarchyEntry> hierarchy_view(const FlatDesign& flat, std::string_view scope) {
  return children_of(flat.tree, scope);
}

std::vector<HierarchyEntry> hierarchy_view(const Design& design, std::string_view scope) {
  return children_of(instance_tree(design), scope);
}

json hierarchy_json(const FlatDesign& flat, std::string_view scope) {
  const ScopeNode* node = flat.scope(scope);
  if (!node) throw UnknownScope("unknown scope '" + std::string(scope) + "'");
  return subtree_json(flat.tree, *node);
}

DesignGraph design_graph(const FlatDesign& flat) { return flat_view(flat, kRootPath); }

DesignGraph flat_view(const FlatDesign& flat, std::string_view scope) {
  if (!flat.scope(scope)) throw UnknownScope("unknown scope '" + std::string(scope) + "'");
  DesignGraph g;
  for (const auto& inst : flat.instances) {
    if (is_under(inst.path, scope)) g.nodes.push_back(inst.path);
  }
  for (const auto& s : flat.signals) {
    bool src_in = is_under(s.source.instance, scope);
    for (const auto& d : s.dests) {
      bool dst_in = is_under(d.instance, scope);
      if (!src_in && !dst_in) continue;
      g.edges.push_back({src_in ? s.source.instance : "", dst_in ? d.instance : "", s.id, s.period, s.mode});
    }
  }
  return g;
}

SccDecomposition scc(const DesignGraph& graph) {
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) index[graph.nodes[i]] = static_cast<int>(i);
  Adjacency adj(graph.nodes.size());
  for (const auto& e : graph.edges) {
    if (e.external()) continue;
    adj[index.at(e.from)].push_back(index.at(e.to));
  }
  auto comps = strongly_connected_components(adj);
  std::vector<std::vector<std::string>> named;
  for (const auto& c : comps) {
    std::vector<std::string> names;
    for (int v : c) names.push_back(graph.nodes[v]);
    std::sort(names.begin(), names.end());
    named.push_back(std::move(names));
  }
  std::sort(named.begin(), named.end(), [](const auto& x, const auto& y) { return x.front() < y.front(); });

  SccDecomposition out;
  out.membership.assign(graph.nodes.size(), -1);
  for (std::size_t c = 0; c < named.size(); ++c) {
    for (const auto& n : named[c]) out.membership[index.at(n)] = static_cast<int>(c);
  }
  std::set<std::pair<int, int>> edges;
  for (std::size_t u = 0; u < adj.size(); ++u) {
    for (int v : adj[u]) {
      int cu = out.membership[u], cv = out.membership[v];
      if (cu != cv) edges.insert({cu, cv});
    }
  }
  out.components = std::move(named);
  out.condensation.assign(edges.begin(), edges.end());
  return out;
}

bool is_acyclic(int nodes, std::span<const std::pair<int, int>> edges) {
  std::vector<int> indegree(nodes, 0);
  Adjacency adj(nodes);
  for (auto [u, v] : edges) {
    adj[u].push_back(v);
    ++indegree[v];
  }
  std::vector<int> ready;
  for (int v = 0; v < nodes; ++v) {
    if (indegree[v] == 0) ready.push_back(v);
  }
  int seen = 0;
  while (!ready.empty()) {
    int u = ready.back();
    ready.pop_back();
    ++seen;
    for (int v : adj[u]) {
      if (--indegree[v] == 0) ready.push_back(v);
    }
  }
  return seen == nodes;
}

json to_json(const DesignGraph& g) {
  json edges = json::array();
  for (const auto& e : g.edges) {
    json j = {{"signal", e.signal}, {"period", e.period}, {"mode", to_string(e.mode)}, {"external", e.external()}};
    j["from"] = e.from.empty() ? json(nullptr) : json(e.from);
    j["to"] = e.to.empty() ? json(nullptr) : json(e.to);
    edges.push_back(std::move(j));
  }
  return {{"nodes", g.nodes}, {"edges", edges}};
}

json to_json(const SccDecomposition& s) {
  json comps = json::array();
  for (std::size_t c = 0; c < s.components.size(); ++c) {
    comps.push_back({{"id", c}, {"members", s.components[c]}, {"cyclic", s.components[c].size() > 1}});
  }
  json cond = json::array();
  for (auto [u, v] : s.condensation) cond.push_back({u, v});
  return {{"components", comps}, {"condensation", cond}};
}

namespace {

std::string dot_id(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string to_dot(const DesignGraph& g) {
  std::ostringstream os;
  os << "digraph design {\n";
  for (const auto& n : g.nodes) os << "  " << dot_id(n) << ";\n";
  int ext = 0;
  for (const auto& e : g.edges) {
    std::string from = e.from, to = e.to;
    if (e.external()) {
      std::string stub = "external" + std::to_string(ext++);
      os << "  " << dot_id(stub) << " [shape=point];\n";
      (from.empty() ? from : to) = stub;
    }
    os << "  " << dot_id(from) << " -> " << dot_id(to) << " [label=" << dot_id(e.signal) << "];\n";
  }
  os << "}\n";
  return os.str();
}

std::string to_dot(const SccDecomposition& s) {
  std::ostringstream os;
  os << "digraph condensation {\n";
  for (std::size_t c = 0; c < s.components.size(); ++c) {
    std::string label;
    for (const auto& m : s.components[c]) label += (label.empty() ? "" : "\n") + m;
    os << "  c" << c << " [label=" << dot_id(label) << "];\n";
  }
  for (auto [u, v] : s.condensation) os << "  c" << u << " -> c" << v << ";\n";
  os << "}\n";
  return os.str();
}

std::string_view to_string(LiveKind k) {
  switch (k) {
    case LiveKind::Processing:
      return "processing";
    case LiveKind::WaitingComm:
      return "waiting_comm";
    case LiveKind::Halted:
      return "halted";
  }
  return "?";
}

std::vector<InstanceStatus> live_status(const SystemState& state) {
  const Machine& m = state.m();
  std::vector<InstanceStatus> out;
  for (std::size_t i = 0; i < m.aes.size(); ++i) {
    const AeState& ae = state.aes[i];
    InstanceStatus s;
    s.path = m.aes[i].path;
    switch (ae.status) {
      case AeStatus::Running:
        s.kind = LiveKind::Processing;
        break;
      case AeStatus::Halted:
        s.kind = LiveKind::Halted;
        break;
      case AeStatus::SleepingOnGet:
      case AeStatus::SleepingOnPut:
        s.kind = LiveKind::WaitingComm;
        if (ae.blocked_port >= 0) {
          const MachinePort& p = m.aes[i].ports[ae.blocked_port];
          s.port = p.name;
          s.signal = m.signals[p.signal].id;
        }
        break;
    }
    out.push_back(std::move(s));
  }
  return out;
}

json to_json(const std::vector<InstanceStatus>& status) {
  json arr = json::array();
  for (const auto& s : status) {
    json j = {{"instance", s.path}, {"status", to_string(s.kind)}};
    if (s.kind == LiveKind::WaitingComm) {
      j["port"] = s.port.empty() ? json(nullptr) : json(s.port);
      j["signal"] = s.signal.empty() ? json(nullptr) : json(s.signal);
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

double signal_utilization(std::span<const TraceEvent> trace, const Machine& m, std::string_view signal,
                          std::uint64_t from, std::uint64_t to) {
  int s = m.signal_index(signal);
  if (s < 0) throw UnknownSignal("unknown signal '" + std::string(signal) + "'");
  if (to < from || to - from < static_cast<std::uint64_t>(m.frame_length)) {
    throw BadSpec("utilization window must span at least one frame (" + std::to_string(m.frame_length) + " cycles)");
  }
  const MachineSignal& sig = m.signals[s];
  std::uint64_t offered = opportunities(from, to - from, sig.period, sig.offset);
  if (offered == 0) return 0.0;
  std::uint64_t fired = 0;
  for (const auto& e : trace) {
    if (e.kind == EventKind::Transfer && e.signal == s && e.cycle >= from && e.cycle < to) ++fired;
  }
  return static_cast<double>(fired) / static_cast<double>(offered);
}

}  // namespace pico
