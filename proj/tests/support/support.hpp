// Helpers shared by the unit and acceptance suites.
#pragma once

#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "picosim/engine.hpp"

namespace picotest {

inline std::string fixture_path(const std::string& name) { return std::string(PICOSIM_FIXTURES) + "/" + name; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string read_fixture(const std::string& name) { return read_file(fixture_path(name)); }

inline std::shared_ptr<const pico::CompiledArtifact> artifact_of(const std::string& source,
                                                                 std::optional<pico::GridConfig> grid = std::nullopt) {
  return std::make_shared<const pico::CompiledArtifact>(pico::build_artifact(source, grid));
}

inline std::shared_ptr<const pico::CompiledArtifact> fixture_artifact(const std::string& name) {
  return artifact_of(read_fixture(name));
}

inline std::vector<std::string> format_all(const pico::Machine& m, const std::vector<pico::TraceEvent>& events) {
  std::vector<std::string> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(pico::format_event(m, e));
  return out;
}

struct RunOutput {
  pico::SystemState state;
  pico::RunResult result;
  std::vector<pico::TraceEvent> events;
};

inline RunOutput run_machine(std::shared_ptr<const pico::Machine> m, std::uint64_t cycles,
                             const pico::RunOptions& opts = {}) {
  pico::VectorSink sink;
  pico::SystemState st = pico::make_initial_state(std::move(m));
  pico::RunResult r = pico::run(st, cycles, opts, &sink);
  return {std::move(st), std::move(r), std::move(sink.events)};
}

inline std::string temp_path(const std::string& name) {
  return std::string(PICOSIM_TEMP_DIR) + "/" + name;
}

// Random acyclic dataflow designs: counters, relays and sinks joined by sync
// and async signals, some multipoint, with random stall loops.
struct RandomDesignOptions {
  int instances = 6;
  int max_inputs = 2;
  std::vector<int> periods = {1, 2, 4, 8};
  double async_share = 0.3;
  double multipoint_share = 0.3;
};

inline std::string random_dataflow(std::mt19937& rng, const RandomDesignOptions& o) {
  struct Sig {
    std::string name;
    int src;
    std::string src_port;
    std::vector<std::pair<int, std::string>> dests;
    int period;
    bool async;
  };
  std::vector<Sig> sigs;
  std::vector<std::vector<std::string>> ins(o.instances), outs(o.instances);
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<unsigned>(n)); };
  auto chance = [&](double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; };

  for (int j = 1; j < o.instances; ++j) {
    int n_in = 1 + pick(o.max_inputs);
    for (int k = 0; k < n_in; ++k) {
      std::string port = "i" + std::to_string(ins[j].size());
      int src = pick(j);
      Sig* reuse = nullptr;
      if (chance(o.multipoint_share)) {
        for (auto& s : sigs) {
          bool already = false;
          for (auto& d : s.dests) already = already || d.first == j;
          if (s.src == src && !already) reuse = &s;
        }
      }
      if (reuse) {
        reuse->dests.push_back({j, port});
      } else {
        Sig s;
        s.name = "s" + std::to_string(sigs.size());
        s.src = src;
        s.src_port = "o" + std::to_string(outs[src].size());
        outs[src].push_back(s.src_port);
        s.dests.push_back({j, port});
        s.period = o.periods[pick(static_cast<int>(o.periods.size()))];
        s.async = chance(o.async_share);
        sigs.push_back(s);
      }
      ins[j].push_back(port);
    }
  }

  std::ostringstream os;
  os << "type word = unsigned(32);\n\n";
  for (int i = 0; i < o.instances; ++i) {
    os << "process p" << i << " {\n";
    for (const auto& p : ins[i]) os << "  in " << p << " : word;\n";
    for (const auto& p : outs[i]) os << "  out " << p << " : word;\n";
    os << "  program {\n    CONST r1, 1\n    CONST r9, " << (rng() % 1000) << "\n  loop:\n";
    for (const auto& p : ins[i]) os << "    GET r2, " << p << "\n    ADD r3, r3, r2\n";
    os << "    ADD r3, r3, r1\n";
    int stall = pick(4);
    if (stall > 0) {
      os << "    CONST r5, " << stall << "\n  wait:\n    SUB r5, r5, r1\n    BRZ r5, go\n    BR wait\n  go:\n";
    }
    for (const auto& p : outs[i]) os << "    XOR r4, r3, r9\n    PUT r4, " << p << "\n";
    os << "    BR loop\n  }\n}\n\n";
  }
  os << "process system {\n";
  for (int i = 0; i < o.instances; ++i) os << "  instance n" << i << " : p" << i << ";\n";
  for (const auto& s : sigs) {
    os << "  signal " << s.name << " : word @every " << s.period << (s.async ? " async" : " sync") << " from n"
       << s.src << "." << s.src_port << " to ";
    for (std::size_t d = 0; d < s.dests.size(); ++d) {
      os << (d ? ", " : "") << "n" << s.dests[d].first << "." << s.dests[d].second;
    }
    os << ";\n";
  }
  os << "}\n\ntop system;\n";
  return os.str();
}

// Compiles a random design, drawing again when it does not fit or schedule.
inline std::pair<std::string, std::shared_ptr<const pico::CompiledArtifact>> random_compiled(
    std::mt19937& rng, const RandomDesignOptions& o) {
  for (;;) {
    std::string src = random_dataflow(rng, o);
    try {
      return {src, artifact_of(src)};
    } catch (const pico::SchedulingConflict&) {
    } catch (const pico::CapacityError&) {
    }
  }
}

}  // namespace picotest
