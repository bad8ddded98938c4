#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "picosim/analysis.hpp"
#include "picosim/instruments.hpp"
#include "picosim/shell.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the Python layer decodes it.
std::string text(const json& j) { return j.dump(); }

using ArtifactPtr = std::shared_ptr<const pico::CompiledArtifact>;

struct Artifact {
  ArtifactPtr ptr;
};

Artifact from_source(const std::string& source, const std::string& grid) {
  std::optional<pico::GridConfig> g;
  if (!grid.empty()) g = pico::grid_from_json(json::parse(grid));
  return {std::make_shared<const pico::CompiledArtifact>(pico::build_artifact(source, g))};
}

// A running simulation with its own trace buffer.
class Simulation {
 public:
  explicit Simulation(const Artifact& a)
      : machine_(pico::build_machine(a.ptr)), state_(pico::make_initial_state(machine_)) {}

  std::string run(std::uint64_t cycles) {
    pico::RunResult r = pico::run(state_, cycles, {}, &sink_);
    pico::flush_outputs(state_);
    json out = {{"reason", pico::to_string(r.reason)}, {"cycles_run", r.cycles_run}, {"cycle", state_.cycle}};
    if (r.deadlock) out["deadlock"] = pico::to_json(*r.deadlock);
    return text(out);
  }

  void step(std::uint64_t n) {
    for (std::uint64_t k = 0; k < n; ++k) pico::step(state_, &sink_);
    pico::flush_outputs(state_);
  }

  std::vector<std::string> take_trace() {
    std::vector<std::string> out;
    out.reserve(sink_.events.size());
    for (const auto& e : sink_.events) out.push_back(pico::format_event(*machine_, e));
    sink_.events.clear();
    return out;
  }

  std::string utilization(const std::string& signal, std::uint64_t from, std::uint64_t to) const {
    return text(pico::signal_utilization(sink_.events, *machine_, signal, from, to));
  }

  std::uint64_t cycle() const { return state_.cycle; }
  std::string snapshot() const { return text(pico::snapshot(state_)); }
  void restore(const std::string& dump) { state_ = pico::restore(machine_, json::parse(dump)); }
  std::string status() const { return text(pico::to_json(pico::live_status(state_))); }
  std::string probes() const { return text(pico::probe_report(state_)); }
  std::string deadlock() const {
    auto r = pico::detect_deadlock(state_);
    return r ? text(pico::to_json(*r)) : "null";
  }

 private:
  std::shared_ptr<const pico::Machine> machine_;
  pico::SystemState state_;
  pico::VectorSink sink_;
};

std::string execute(pico::Session& s, const std::string& line) { return text(s.execute_line(line).to_json()); }

std::string execute_json(pico::Session& s, const std::string& request) {
  json req = json::parse(request);
  pico::Command c = pico::parse_command_json(req);
  return text(s.execute(c).to_json(c.id));
}

std::string script(pico::Session& s, const std::string& body) {
  json out = json::array();
  for (const auto& e : pico::run_script(s, body)) {
    out.push_back({{"line", e.line}, {"command", e.command}, {"result", e.result.to_json()}});
  }
  return text(out);
}

}  // namespace

PYBIND11_MODULE(_picosim, m) {
  m.doc() = "Cycle-level simulator core";

  auto base = py::register_exception<pico::Error>(m, "Error");
  py::register_exception<pico::ParseError>(m, "ParseError", base);
  py::register_exception<pico::ElaborationError>(m, "ElaborationError", base);
  py::register_exception<pico::CapacityError>(m, "CapacityError", base);
  py::register_exception<pico::SchedulingConflict>(m, "SchedulingConflict", base);
  py::register_exception<pico::NoReserveError>(m, "NoReserveError", base);
  py::register_exception<pico::TapRouteError>(m, "TapRouteError", base);
  py::register_exception<pico::FileFormatError>(m, "FileFormatError", base);
  py::register_exception<pico::MissingFile>(m, "MissingFile", base);
  py::register_exception<pico::UnknownScope>(m, "UnknownScope", base);
  py::register_exception<pico::UnknownSignal>(m, "UnknownSignal", base);
  py::register_exception<pico::UnknownInstance>(m, "UnknownInstance", base);
  py::register_exception<pico::TypeMismatch>(m, "TypeMismatch", base);
  py::register_exception<pico::BadSpec>(m, "BadSpec", base);
  py::register_exception<pico::FormatError>(m, "FormatError", base);
  py::register_exception<pico::ScriptError>(m, "ScriptError", base);

  py::class_<Artifact>(m, "Artifact")
      .def_static("from_source", &from_source, py::arg("source"), py::arg("grid") = "")
      .def_static("load", [](const std::string& path) {
        return Artifact{std::make_shared<const pico::CompiledArtifact>(pico::load_artifact(path))};
      })
      .def("save", [](const Artifact& a, const std::string& path) { pico::save_artifact(*a.ptr, path); })
      .def("to_json", [](const Artifact& a) { return text(pico::to_json(*a.ptr)); })
      .def("with_probe",
           [](const Artifact& a, const std::string& spec) {
             return Artifact{std::make_shared<const pico::CompiledArtifact>(
                 pico::insert_probe(*a.ptr, pico::parse_probe_spec(spec)))};
           })
      .def("with_binding",
           [](const Artifact& a, const std::string& spec) {
             return Artifact{std::make_shared<const pico::CompiledArtifact>(
                 pico::bind_file(*a.ptr, pico::parse_binding(spec)))};
           })
      .def_property_readonly("instances",
                             [](const Artifact& a) {
                               std::vector<std::string> out;
                               for (const auto& i : a.ptr->design.instances) out.push_back(i.path);
                               return out;
                             })
      .def_property_readonly("signals",
                             [](const Artifact& a) {
                               std::vector<std::string> out;
                               for (const auto& s : a.ptr->design.signals) out.push_back(s.id);
                               return out;
                             })
      .def_property_readonly("frame_length", [](const Artifact& a) { return a.ptr->schedule.frame_length; });

  py::class_<Simulation>(m, "Simulation")
      .def(py::init<const Artifact&>())
      .def("run", &Simulation::run)
      .def("step", &Simulation::step, py::arg("n") = 1)
      .def("take_trace", &Simulation::take_trace)
      .def("utilization", &Simulation::utilization)
      .def_property_readonly("cycle", &Simulation::cycle)
      .def("snapshot", &Simulation::snapshot)
      .def("restore", &Simulation::restore)
      .def("status", &Simulation::status)
      .def("probes", &Simulation::probes)
      .def("deadlock", &Simulation::deadlock);

  py::class_<pico::Session>(m, "Session")
      .def(py::init<>())
      .def(py::init<const std::string&>())
      .def("execute", &execute)
      .def("execute_json", &execute_json)
      .def("run_script", &script)
      .def_property_readonly("journal", &pico::Session::journal)
      .def("snapshot", [](const pico::Session& s) { return text(pico::snapshot(s.state())); });

  m.def("scc", [](const Artifact& a) { return text(pico::to_json(pico::scc(pico::design_graph(a.ptr->design)))); });
  m.def("scc_dot", [](const Artifact& a) { return pico::to_dot(pico::scc(pico::design_graph(a.ptr->design))); });
  m.def("hierarchy", [](const Artifact& a, const std::string& scope) {
    return text(pico::hierarchy_json(a.ptr->design, scope));
  });
  m.def("flat", [](const Artifact& a, const std::string& scope) {
    return text(pico::to_json(pico::flat_view(a.ptr->design, scope)));
  });
  m.def("ber", [](const std::vector<std::uint32_t>& test, const std::vector<std::uint32_t>& ref, int width) {
    pico::BerResult r = pico::ber(test, ref, width);
    return py::make_tuple(r.errors, r.total_bits, r.rate);
  });
  m.def("aggregate_bandwidth", [](std::uint64_t ae_count, int buses_per_track, int bus_width, double clock_hz) {
    pico::GridConfig g;
    g.buses_per_track = buses_per_track;
    g.bus_width = bus_width;
    g.clock_hz = clock_hz;
    return pico::aggregate_bandwidth(g, ae_count);
  });
}
