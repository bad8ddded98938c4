#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "picosim/fabric.hpp"
#include "picosim/netlist.hpp"

namespace pico {

enum class ProbeKind { Trace, AssertPredicate, AssertBandwidth, Ber };
enum class Comparator { Eq, Ne, Lt, Le, Gt, Ge };

std::string_view to_string(ProbeKind k);
std::string_view to_string(Comparator c);
bool compare(Comparator c, std::uint32_t lhs, std::uint32_t rhs);

// Textual forms:
//   trace <signal>
//   assert <signal> <eq|ne|lt|le|gt|ge> <constant>
//   bandwidth <signal> <floor> <window>
//   ber <test-signal> <reference-signal>
struct ProbeSpec {
  ProbeKind kind = ProbeKind::Trace;
  std::vector<std::string> signals;
  Comparator cmp = Comparator::Eq;
  std::uint32_t constant = 0;
  double floor = 0.0;
  int window = 0;

  std::string text() const;
  friend bool operator==(const ProbeSpec&, const ProbeSpec&) = default;
};

ProbeSpec parse_probe_spec(std::string_view text);

// A probe element placed on a reserved coordinate. Its in ports are named
// tap0, tap1, ... one per target signal.
struct ProbeInstance {
  std::string path;
  ProbeSpec spec;  // signal names resolved to flat ids
  Coord at;
  Program program;
  friend bool operator==(const ProbeInstance&, const ProbeInstance&) = default;
};

enum class BindDirection { Input, Output };

struct FileBinding {
  BindDirection dir = BindDirection::Input;
  std::string path;
  std::string signal;  // flat signal id
  friend bool operator==(const FileBinding&, const FileBinding&) = default;
};

// The unit the engine and the debug shell load: everything fixed at compile
// time plus debug-time additions (probes, file bindings).
struct CompiledArtifact {
  FlatDesign design;
  GridConfig grid;
  Placement placement;
  RouteMap routes;
  ScheduleTable schedule;
  std::vector<ProbeInstance> probes;
  std::vector<FileBinding> bindings;

  friend bool operator==(const CompiledArtifact&, const CompiledArtifact&) = default;
};

CompiledArtifact compile_artifact(FlatDesign design, const GridConfig& grid);
// Parses and compiles design source; uses default_grid() when no grid given.
CompiledArtifact build_artifact(std::string_view source, std::optional<GridConfig> grid = std::nullopt);

nlohmann::json to_json(const GridConfig& g);
GridConfig grid_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CompiledArtifact& a);
CompiledArtifact artifact_from_json(const nlohmann::json& j);

void save_artifact(const CompiledArtifact& a, const std::string& path);
CompiledArtifact load_artifact(const std::string& path);

}  // namespace pico
