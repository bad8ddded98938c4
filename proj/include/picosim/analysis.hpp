#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "picosim/engine.hpp"
#include "picosim/netlist.hpp"

namespace pico {

// One level of the instantiation tree below a scope.
struct HierarchyEntry {
  std::string path;
  std::string name;
  std::string decl;
  bool composite = false;
  int child_count = 0;
  friend bool operator==(const HierarchyEntry&, const HierarchyEntry&) = default;
};

// Throws UnknownScope.
std::vector<HierarchyEntry> hierarchy_view(const FlatDesign& flat, std::string_view scope);
std::vector<HierarchyEntry> hierarchy_view(const Design& design, std::string_view scope);
// Full recursive expansion as nested {path, name, decl, kind, children}.
nlohmann::json hierarchy_json(const FlatDesign& flat, std::string_view scope);

struct GraphEdge {
  std::string from;  // empty: source lies outside the viewed scope
  std::string to;    // empty: destination lies outside the viewed scope
  std::string signal;
  int period = 1;
  SignalMode mode = SignalMode::Sync;
  bool external() const { return from.empty() || to.empty(); }
  friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

struct DesignGraph {
  std::vector<std::string> nodes;  // sorted leaf paths
  std::vector<GraphEdge> edges;    // signal id order, then destination order
  friend bool operator==(const DesignGraph&, const DesignGraph&) = default;
};

DesignGraph design_graph(const FlatDesign& flat);
// Leaves under `scope`; throws UnknownScope.
DesignGraph flat_view(const FlatDesign& flat, std::string_view scope);

struct SccDecomposition {
  std::vector<std::vector<std::string>> components;  // numbered by smallest member path
  std::vector<int> membership;                       // parallel to graph nodes
  std::vector<std::pair<int, int>> condensation;     // sorted unique component edges
};

// External half-edges are ignored.
SccDecomposition scc(const DesignGraph& graph);
bool is_acyclic(int nodes, std::span<const std::pair<int, int>> edges);

nlohmann::json to_json(const DesignGraph& g);
nlohmann::json to_json(const SccDecomposition& s);
std::string to_dot(const DesignGraph& g);
std::string to_dot(const SccDecomposition& s);

enum class LiveKind { Processing, WaitingComm, Halted };
std::string_view to_string(LiveKind k);

struct InstanceStatus {
  std::string path;
  LiveKind kind = LiveKind::Processing;
  std::string port;    // waiting_comm only; empty when waiting on a host file
  std::string signal;  // waiting_comm only
  friend bool operator==(const InstanceStatus&, const InstanceStatus&) = default;
};

// Design instances in path order, then probes.
std::vector<InstanceStatus> live_status(const SystemState& state);
nlohmann::json to_json(const std::vector<InstanceStatus>& status);

// Transfers of `signal` in cycles [from, to) over the opportunities its slot
// offers in that range. The range must span at least one frame.
double signal_utilization(std::span<const TraceEvent> trace, const Machine& m, std::string_view signal,
                          std::uint64_t from, std::uint64_t to);

}  // namespace pico
