// picosim command-line front end.
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "picosim/analysis.hpp"
#include "picosim/engine.hpp"
#include "picosim/instruments.hpp"
#include "picosim/shell.hpp"

namespace {

using nlohmann::json;
using namespace pico;

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string default_output(const std::string& design) {
  auto dot = design.rfind('.');
  auto slash = design.rfind('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return design + ".pgc";
  return design.substr(0, dot) + ".pgc";
}

GridConfig parse_grid(const std::string& text, std::size_t instances) {
  GridConfig g = default_grid(instances);
  auto comma = text.find(',');
  if (comma == std::string::npos) throw BadSpec("grid must be rows,cols");
  try {
    g.rows = std::stoi(text.substr(0, comma));
    g.cols = std::stoi(text.substr(comma + 1));
  } catch (const std::exception&) {
    throw BadSpec("grid must be rows,cols");
  }
  return g;
}

int cmd_build(const std::string& design, const std::string& grid_text, std::string out, int buses, int depth) {
  FlatDesign flat = compile_design(read_text(design));
  GridConfig grid = grid_text.empty() ? default_grid(flat.instances.size()) : parse_grid(grid_text, flat.instances.size());
  if (buses > 0) grid.buses_per_track = buses;
  if (depth > 0) grid.buffer_depth = depth;
  CompiledArtifact a = compile_artifact(std::move(flat), grid);
  if (out.empty()) out = default_output(design);
  save_artifact(a, out);
  std::cout << json{{"artifact", out},
                    {"design", a.design.name},
                    {"instances", a.design.instances.size()},
                    {"signals", a.design.signals.size()},
                    {"grid", to_json(a.grid)},
                    {"frame_length", a.schedule.frame_length},
                    {"probe_reserve", a.placement.reserve.size()}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_run(const std::string& pgc, std::uint64_t cycles, const std::string& trace_path,
            const std::vector<std::string>& binds, const std::vector<std::string>& probes,
            const std::string& snapshot_path) {
  CompiledArtifact a = load_artifact(pgc);
  for (const auto& b : binds) a = bind_file(a, parse_binding(b));
  for (const auto& p : probes) a = insert_probe(a, parse_probe_spec(p));
  auto machine = build_machine(std::make_shared<const CompiledArtifact>(std::move(a)));
  SystemState state = make_initial_state(machine);
  std::ofstream trace;
  std::unique_ptr<JsonlSink> sink;
  if (!trace_path.empty()) {
    trace.open(trace_path, std::ios::trunc);
    if (!trace) throw Error("cannot write " + trace_path);
    sink = std::make_unique<JsonlSink>(trace);
  }
  RunResult r = run(state, cycles, {}, sink.get());
  flush_outputs(state);
  json out = {{"reason", to_string(r.reason)}, {"cycles_run", r.cycles_run}, {"cycle", state.cycle}};
  if (r.deadlock) out["deadlock"] = to_json(*r.deadlock);
  if (!machine->artifact->probes.empty()) out["probes"] = probe_report(state);
  if (!snapshot_path.empty()) {
    std::ofstream snap(snapshot_path, std::ios::trunc);
    if (!snap) throw Error("cannot write " + snapshot_path);
    snap << snapshot(state).dump(2) << '\n';
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_analyze(const std::string& pgc, bool want_scc, const std::string& flat_scope,
                const std::string& hierarchy_scope, bool dot) {
  CompiledArtifact a = load_artifact(pgc);
  if (want_scc) {
    auto s = scc(design_graph(a.design));
    std::cout << (dot ? to_dot(s) : to_json(s).dump(2) + "\n");
  }
  if (!flat_scope.empty()) {
    auto g = flat_view(a.design, flat_scope);
    std::cout << (dot ? to_dot(g) : to_json(g).dump(2) + "\n");
  }
  if (!hierarchy_scope.empty()) std::cout << hierarchy_json(a.design, hierarchy_scope).dump(2) << '\n';
  if (!want_scc && flat_scope.empty() && hierarchy_scope.empty()) {
    auto s = scc(design_graph(a.design));
    std::cout << json{{"design", a.design.name},
                      {"hierarchy", hierarchy_json(a.design, kRootPath)},
                      {"scc", to_json(s)}}
                     .dump(2)
              << '\n';
  }
  return 0;
}

int cmd_shell(const std::string& pgc, const std::string& script) {
  Session session(pgc);
  if (!script.empty()) {
    try {
      for (const auto& e : run_script(session, read_text(script))) {
        std::cout << json{{"line", e.line}, {"command", e.command}, {"result", e.result.to_json()}}.dump() << '\n';
      }
    } catch (const ScriptError& e) {
      for (const auto& t : e.transcript()) {
        std::cout << json{{"line", t.line}, {"command", t.command}, {"result", t.result.to_json()}}.dump() << '\n';
      }
      throw;
    }
    return 0;
  }
  std::string line;
  while (!session.quit_requested()) {
    std::cout << "picosim> " << std::flush;
    if (!std::getline(std::cin, line)) break;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    CommandResult r;
    try {
      r = session.execute_line(line);
    } catch (const Error& e) {
      r.ok = false;
      r.error_type = error_type_name(e);
      r.error = e.what();
    }
    std::cout << (r.ok ? r.data.dump(2) : r.error_type + ": " + r.error) << '\n';
  }
  return 0;
}

int cmd_serve(const std::string& pgc, const std::string& socket) {
  Session session(pgc);
  Server server(session, socket);
  std::cerr << "listening on " << server.listen() << '\n';
  server.serve();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"picosim: compile, run and debug picoArray-style designs"};
  app.require_subcommand(1);

  std::string design, grid, out, pgc, trace, snap, flat_scope, hierarchy_scope, script, socket;
  int buses = 0, depth = 0;
  std::uint64_t cycles = 1000;
  std::vector<std::string> binds, probes;
  bool want_scc = false, dot = false;

  auto* build = app.add_subcommand("build", "compile a design into an artifact");
  build->add_option("design", design, "design source (.pg)")->required();
  build->add_option("-g,--grid", grid, "grid size rows,cols");
  build->add_option("-o,--output", out, "artifact path (default: design with .pgc)");
  build->add_option("--buses", buses, "buses per track");
  build->add_option("--depth", depth, "port buffer depth");

  auto* runc = app.add_subcommand("run", "run an artifact");
  runc->add_option("artifact", pgc, "compiled artifact")->required();
  runc->add_option("--cycles", cycles, "cycle budget");
  runc->add_option("--trace", trace, "write the trace as JSON lines");
  runc->add_option("--bind", binds, "file binding in|out=path:signal");
  runc->add_option("--probe", probes, "probe spec, e.g. \"trace s1\"");
  runc->add_option("--snapshot", snap, "write the final state dump");

  auto* analyze = app.add_subcommand("analyze", "static views of an artifact");
  analyze->add_option("artifact", pgc, "compiled artifact")->required();
  analyze->add_flag("--scc", want_scc, "strongly connected components and condensation");
  analyze->add_option("--flat", flat_scope, "flat graph below a scope");
  analyze->add_option("--hierarchy", hierarchy_scope, "instantiation tree below a scope");
  analyze->add_flag("--dot", dot, "emit graphs in DOT");

  auto* shell = app.add_subcommand("shell", "interactive debug shell");
  shell->add_option("artifact", pgc, "compiled artifact")->required();
  shell->add_option("--script", script, "run a script instead of reading stdin");

  auto* serve = app.add_subcommand("serve", "serve the session protocol");
  serve->add_option("artifact", pgc, "compiled artifact")->required();
  serve->add_option("--socket", socket, "unix socket path or tcp:host:port")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*build) return cmd_build(design, grid, out, buses, depth);
    if (*runc) return cmd_run(pgc, cycles, trace, binds, probes, snap);
    if (*analyze) return cmd_analyze(pgc, want_scc, flat_scope, hierarchy_scope, dot);
    if (*shell) return cmd_shell(pgc, script);
    if (*serve) return cmd_serve(pgc, socket);
  } catch (const pico::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
