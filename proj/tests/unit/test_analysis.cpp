#include <doctest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "picosim/analysis.hpp"
#include "support.hpp"

using namespace pico;
using picotest::fixture_artifact;
using picotest::run_machine;

namespace {

DesignGraph graph_from(int n, const std::vector<std::pair<int, int>>& edges) {
  DesignGraph g;
  for (int i = 0; i < n; ++i) g.nodes.push_back("n" + std::to_string(i));
  for (auto [u, v] : edges) g.edges.push_back({g.nodes[u], g.nodes[v], "e", 1, SignalMode::Sync});
  return g;
}

// Mutual reachability from the transitive closure.
std::vector<int> closure_classes(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
  for (int i = 0; i < n; ++i) r[i][i] = true;
  for (auto [u, v] : edges) r[u][v] = true;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (r[i][k] && r[k][j]) r[i][j] = true;
  std::vector<int> cls(n, -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    if (cls[i] >= 0) continue;
    for (int j = i; j < n; ++j) {
      if (r[i][j] && r[j][i]) cls[j] = next;
    }
    ++next;
  }
  return cls;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

std::vector<std::pair<int, int>> random_edges(std::mt19937& rng, int n) {
  std::vector<std::pair<int, int>> edges;
  int m = static_cast<int>(rng() % static_cast<unsigned>(n * 2 + 1));
  for (int k = 0; k < m; ++k) edges.push_back({static_cast<int>(rng() % n), static_cast<int>(rng() % n)});
  return edges;
}

}  // namespace

TEST_CASE("hierarchy view one level at a time") {
  auto a = fixture_artifact("composites.pg");
  auto root = hierarchy_view(a->design, "top");
  REQUIRE(root.size() == 3);
  CHECK(root[0].path == "top/A");
  CHECK(root[0].composite);
  CHECK(root[0].child_count == 3);
  CHECK(root[1].path == "top/B");
  CHECK(root[1].composite);
  CHECK(hierarchy_view(a->design, "top/A/g").empty());
  CHECK(hierarchy_view(a->design, "top/C").empty());
  CHECK_THROWS_AS(hierarchy_view(a->design, "top/nope"), UnknownScope);
  // The unelaborated design gives the same answer.
  Design d = parse_design(picotest::read_fixture("composites.pg"));
  CHECK(hierarchy_view(d, "top") == root);
}

TEST_CASE("hierarchy of the three-level fixture") {
  auto a = fixture_artifact("hier3.pg");
  nlohmann::json tree = hierarchy_json(a->design, "top");
  auto expected = nlohmann::json::parse(R"({
    "path": "top", "name": "top", "decl": "system", "kind": "composite", "children": [
      {"path": "top/a", "name": "a", "decl": "mid_src", "kind": "composite", "children": [
        {"path": "top/a/x", "name": "x", "decl": "inner_src", "kind": "composite", "children": [
          {"path": "top/a/x/g", "name": "g", "decl": "gen", "kind": "leaf", "children": []}]}]},
      {"path": "top/b", "name": "b", "decl": "mid_dst", "kind": "composite", "children": [
        {"path": "top/b/y", "name": "y", "decl": "inner_dst", "kind": "composite", "children": [
          {"path": "top/b/y/e", "name": "e", "decl": "eat", "kind": "leaf", "children": []}]},
        {"path": "top/b/z", "name": "z", "decl": "eat", "kind": "leaf", "children": []}]}]})");
  CHECK(tree == expected);
}

TEST_CASE("flat view of root and subtrees") {
  auto a = fixture_artifact("composites.pg");
  DesignGraph all = flat_view(a->design, "top");
  CHECK(all.nodes.size() == a->design.instances.size());
  std::size_t pairs = 0;
  for (const auto& s : a->design.signals) pairs += s.dests.size();
  CHECK(all.edges.size() == pairs);
  for (const auto& e : all.edges) CHECK_FALSE(e.external());

  DesignGraph front = flat_view(a->design, "top/A");
  CHECK(front.nodes == std::vector<std::string>{"top/A/g", "top/A/h", "top/A/k"});
  int external = 0;
  for (const auto& e : front.edges) {
    if (e.external()) {
      ++external;
      CHECK(e.from == "top/A/g");
      CHECK(e.to.empty());
    }
  }
  CHECK(external == 1);

  DesignGraph hollow = flat_view(a->design, "top/C");
  CHECK(hollow.nodes.empty());
  CHECK(hollow.edges.empty());
  CHECK_THROWS_AS(flat_view(a->design, "top/Z"), UnknownScope);
}

TEST_CASE("scc of a ring and a pipeline") {
  SccDecomposition ring = scc(graph_from(3, {{0, 1}, {1, 2}, {2, 0}}));
  REQUIRE(ring.components.size() == 1);
  CHECK(ring.components[0].size() == 3);
  CHECK(ring.condensation.empty());

  SccDecomposition pipe = scc(graph_from(3, {{0, 1}, {1, 2}}));
  CHECK(pipe.components == std::vector<std::vector<std::string>>{{"n0"}, {"n1"}, {"n2"}});
  CHECK(pipe.condensation == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}});
}

TEST_CASE("scc matches the closure oracle on random digraphs") {
  std::mt19937 rng(29);
  for (int k = 0; k < 200; ++k) {
    int n = 1 + static_cast<int>(rng() % 10);
    auto edges = random_edges(rng, n);
    SccDecomposition s = scc(graph_from(n, edges));
    CHECK(same_partition(s.membership, closure_classes(n, edges)));
    CHECK(is_acyclic(static_cast<int>(s.components.size()), s.condensation));
    for (std::size_t c = 1; c < s.components.size(); ++c) CHECK(s.components[c - 1].front() < s.components[c].front());
  }
}

TEST_CASE("adding an edge never splits a component") {
  std::mt19937 rng(31);
  for (int k = 0; k < 200; ++k) {
    int n = 2 + static_cast<int>(rng() % 9);
    auto edges = random_edges(rng, n);
    SccDecomposition before = scc(graph_from(n, edges));
    edges.push_back({static_cast<int>(rng() % n), static_cast<int>(rng() % n)});
    SccDecomposition after = scc(graph_from(n, edges));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (before.membership[i] == before.membership[j]) CHECK(after.membership[i] == after.membership[j]);
  }
}

TEST_CASE("scc export formats are stable") {
  auto a = fixture_artifact("ring3.pg");
  SccDecomposition s = scc(design_graph(a->design));
  nlohmann::json j = to_json(s);
  CHECK(j["components"].size() == 1);
  CHECK(j["components"][0]["members"] == nlohmann::json::array({"top/a", "top/b", "top/c"}));
  CHECK(to_dot(s) == "digraph condensation {\n  c0 [label=\"top/a\\ntop/b\\ntop/c\"];\n}\n");
  std::string dot = to_dot(design_graph(a->design));
  CHECK(dot.find("\"top/a\" -> \"top/b\" [label=\"top/s_ab\"];") != std::string::npos);
}

TEST_CASE("live status classification") {
  auto m = build_machine(fixture_artifact("producer_consumer.pg"));
  SystemState st = make_initial_state(m);
  for (const auto& s : live_status(st)) CHECK(s.kind == LiveKind::Processing);
  run(st, 3);
  auto status = live_status(st);
  const InstanceStatus& c = status[m->ae_index("top/c")];
  CHECK(c.kind == LiveKind::WaitingComm);
  CHECK(c.port == "i");
  CHECK(c.signal == "top/s");
  run(st, 100);
  for (const auto& s : live_status(st)) CHECK(s.kind == LiveKind::Halted);
}

TEST_CASE("utilization of a saturated signal is 1") {
  auto m = build_machine(fixture_artifact("saturated.pg"));
  auto out = run_machine(m, 1000);
  // Cycle 0 offers a slot before the first PUT.
  CHECK(signal_utilization(out.events, *m, "sig1", 0, 1000) == 249.0 / 250.0);
  CHECK(signal_utilization(out.events, *m, "sig1", 64, 1000) == 1.0);
  CHECK(signal_utilization(out.events, *m, "top/sig1", 200, 264) == 1.0);
  CHECK_THROWS_AS(signal_utilization(out.events, *m, "nope", 0, 100), UnknownSignal);
}

TEST_CASE("utilization arithmetic: 8 transfers in 64 slots at period 4") {
  auto m = build_machine(fixture_artifact("producer_consumer.pg"));
  std::vector<TraceEvent> events;
  int s = m->signal_index("s");
  for (int k = 0; k < 8; ++k) events.push_back({static_cast<std::uint64_t>(8 * k), EventKind::Transfer, s, -1, true, 0});
  CHECK(signal_utilization(events, *m, "s", 0, 64) == 0.5);
}

TEST_CASE("utilization of a blocked pipeline matches a hand count") {
  // producer_consumer: transfers at 4, 8, 16, 20, 24 (see the engine tests);
  // cycles [0, 32) offer 8 period-4 opportunities.
  auto m = build_machine(fixture_artifact("producer_consumer.pg"));
  auto out = run_machine(m, 100);
  CHECK(signal_utilization(out.events, *m, "s", 0, 32) == 5.0 / 8.0);
  CHECK(signal_utilization(out.events, *m, "s", 8, 16) == 0.5);
}

TEST_CASE("utilization is translation invariant in steady state") {
  auto m = build_machine(fixture_artifact("duty50.pg"));
  auto out = run_machine(m, 2000);
  double first = signal_utilization(out.events, *m, "half", 100, 164);
  for (std::uint64_t start : {164u, 500u, 1000u, 1800u}) {
    CHECK(signal_utilization(out.events, *m, "half", start, start + 64) == first);
  }
  CHECK(first == 0.5);
}
