#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "picosim/artifact.hpp"
#include "support.hpp"

using namespace pico;

namespace {

GridConfig grid(int rows, int cols, int buses = 2) {
  GridConfig g;
  g.rows = rows;
  g.cols = cols;
  g.buses_per_track = buses;
  return g;
}

const char* kChain = R"(
type w = unsigned(8);
process head { out o : w; program { HALT } }
process mid { in i : w; out o : w; program { HALT } }
process tail { in i : w; program { HALT } }
process system {
  instance a : head;
  instance b : mid;
  instance c : tail;
  signal ab : w from a.o to b.i;
  signal bc : w from b.o to c.i;
}
top system;
)";

int total_length(const FlatDesign& flat, const std::map<std::string, Coord>& at) {
  int sum = 0;
  for (const auto& s : flat.signals) {
    for (const auto& d : s.dests) sum += manhattan(at.at(s.source.instance), at.at(d.instance));
  }
  return sum;
}

// n independent producer/consumer pairs with the given periods.
std::string pairs_design(const std::vector<int>& periods) {
  std::string s = "type w = unsigned(8);\nprocess gen { out o : w; program { HALT } }\n"
                  "process eat { in i : w; program { HALT } }\nprocess system {\n";
  for (std::size_t k = 0; k < periods.size(); ++k) {
    s += "  instance g" + std::to_string(k) + " : gen;\n  instance e" + std::to_string(k) + " : eat;\n";
    s += "  signal s" + std::to_string(k) + " : w @every " + std::to_string(periods[k]) + " from g" +
         std::to_string(k) + ".o to e" + std::to_string(k) + ".i;\n";
  }
  return s + "}\ntop system;\n";
}

// Connected-tree check: every terminal reachable from the source over route
// segments.
bool covers(const Route& r, Coord src, const std::vector<Coord>& dests) {
  std::set<Coord> seen{src};
  std::vector<Coord> stack{src};
  while (!stack.empty()) {
    Coord c = stack.back();
    stack.pop_back();
    for (const auto& s : r.segments) {
      Coord a = s.kind == TrackKind::Row ? Coord{s.track, s.span} : Coord{s.span, s.track};
      Coord b = s.kind == TrackKind::Row ? Coord{s.track, s.span + 1} : Coord{s.span + 1, s.track};
      for (auto [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
        if (x == c && !seen.count(y)) {
          seen.insert(y);
          stack.push_back(y);
        }
      }
    }
  }
  return std::all_of(dests.begin(), dests.end(), [&](Coord d) { return seen.count(d) > 0; });
}

}  // namespace

TEST_CASE("single instance on a 1x2 grid") {
  FlatDesign flat = compile_design("process leaf { program { HALT } }\nprocess system { instance x : leaf; }\ntop system;\n");
  Placement p = place(flat, grid(1, 2));
  CHECK(p.of("top/x") == Coord{0, 0});
  CHECK(p.reserve == std::vector<Coord>{{0, 1}});
}

TEST_CASE("chain on a 1x4 grid is no longer than any permutation") {
  FlatDesign flat = compile_design(kChain);
  Placement p = place(flat, grid(1, 4));
  int got = total_length(flat, p.at);

  int best = 1 << 30;
  std::vector<int> cols = {0, 1, 2, 3};
  do {
    std::map<std::string, Coord> at = {{"top/a", {0, cols[0]}}, {"top/b", {0, cols[1]}}, {"top/c", {0, cols[2]}}};
    best = std::min(best, total_length(flat, at));
  } while (std::next_permutation(cols.begin(), cols.end()));
  CHECK(got == best);
  CHECK(got == 2);
  CHECK(p.reserve.size() == 1);
}

TEST_CASE("capacity error when instances exceed the grid") {
  std::string src = "process leaf { program { HALT } }\nprocess system {\n";
  for (int k = 0; k < 5; ++k) src += "  instance x" + std::to_string(k) + " : leaf;\n";
  src += "}\ntop system;\n";
  CHECK_THROWS_AS(place(compile_design(src), grid(2, 2)), CapacityError);
  // Four fit the cells but not the reserve.
  std::string four = "process leaf { program { HALT } }\nprocess system {\n";
  for (int k = 0; k < 4; ++k) four += "  instance x" + std::to_string(k) + " : leaf;\n";
  four += "}\ntop system;\n";
  CHECK_THROWS_AS(place(compile_design(four), grid(2, 2)), CapacityError);
}

TEST_CASE("placement reserve is at least five percent") {
  for (int n : {1, 3, 7, 12, 20, 40}) {
    GridConfig g = default_grid(static_cast<std::size_t>(n));
    CHECK(g.cells() - n >= static_cast<int>(std::ceil(0.05 * g.cells() - 1e-9)));
  }
}

TEST_CASE("straight route in one row") {
  Route r = route_tree("s", {0, 0}, std::vector<Coord>{{0, 2}});
  CHECK(r.segments == std::vector<Segment>{{TrackKind::Row, 0, 0}, {TrackKind::Row, 0, 1}});
  CHECK_FALSE(r.local_loop);
}

TEST_CASE("three-terminal tree matches the minimal rectilinear Steiner length") {
  std::vector<Coord> dests = {{0, 2}, {2, 2}};
  Route r = route_tree("s", {0, 0}, dests);
  // For three terminals the minimal rectilinear Steiner tree spans the
  // half-perimeter of the bounding box: (2 - 0) + (2 - 0).
  CHECK(r.segments.size() == 4);
  CHECK(covers(r, {0, 0}, dests));
  CHECK(r.segments == std::vector<Segment>{{TrackKind::Row, 0, 0},
                                           {TrackKind::Row, 0, 1},
                                           {TrackKind::Column, 2, 0},
                                           {TrackKind::Column, 2, 1}});
}

TEST_CASE("random routes are connected trees") {
  std::mt19937 rng(3);
  for (int k = 0; k < 300; ++k) {
    Coord src{static_cast<int>(rng() % 6), static_cast<int>(rng() % 6)};
    std::vector<Coord> dests;
    int n = 1 + static_cast<int>(rng() % 4);
    for (int d = 0; d < n; ++d) dests.push_back({static_cast<int>(rng() % 6), static_cast<int>(rng() % 6)});
    Route r = route_tree("s", src, dests);
    CHECK(covers(r, src, dests));
    CHECK(std::is_sorted(r.segments.begin(), r.segments.end()));
  }
}

TEST_CASE("local loop route is empty and schedulable") {
  Route r = route_tree("s", {1, 1}, std::vector<Coord>{{1, 1}});
  CHECK(r.segments.empty());
  CHECK(r.local_loop);
}

TEST_CASE("disjoint signals both take offset 0") {
  FlatDesign flat = compile_design(pairs_design({4, 4}));
  GridConfig g = grid(4, 4);
  Placement p = place(flat, g);
  RouteMap routes;
  routes["top/s0"] = route_tree("top/s0", {0, 0}, std::vector<Coord>{{0, 1}});
  routes["top/s1"] = route_tree("top/s1", {2, 0}, std::vector<Coord>{{2, 1}});
  ScheduleTable t = schedule(flat, p, routes, g);
  CHECK(t.frame_length == 4);
  CHECK(t.find("top/s0")->offset == 0);
  CHECK(t.find("top/s1")->offset == 0);
}

TEST_CASE("two signals sharing a segment take offsets 0 and 1") {
  FlatDesign flat = compile_design(pairs_design({4, 4}));
  GridConfig g = grid(4, 4);
  Placement p = place(flat, g);
  RouteMap routes;
  routes["top/s0"] = route_tree("top/s0", {0, 0}, std::vector<Coord>{{0, 1}});
  routes["top/s1"] = route_tree("top/s1", {0, 0}, std::vector<Coord>{{0, 2}});
  ScheduleTable t = schedule(flat, p, routes, g);
  CHECK(t.find("top/s0")->offset == 0);
  CHECK(t.find("top/s1")->offset == 1);
  CHECK(t.find("top/s0")->bus_on({TrackKind::Row, 0}) == 0);
  CHECK(t.find("top/s1")->bus_on({TrackKind::Row, 0}) == 0);
}

TEST_CASE("five period-4 signals on one single-bus segment conflict") {
  FlatDesign flat = compile_design(pairs_design({4, 4, 4, 4, 4}));
  GridConfig g = grid(4, 4, 1);
  Placement p = place(flat, g);
  RouteMap routes;
  for (int k = 0; k < 5; ++k) {
    std::string id = "top/s" + std::to_string(k);
    routes[id] = route_tree(id, {0, 0}, std::vector<Coord>{{0, 1}});
  }
  try {
    schedule(flat, p, routes, g);
    FAIL("expected SchedulingConflict");
  } catch (const SchedulingConflict& e) {
    CHECK(e.signal() == "top/s4");
    REQUIRE(e.blockers().size() == 4);
    for (const auto& b : e.blockers()) CHECK(b.signals.size() == 1);
  }
  // A second bus absorbs the fifth.
  ScheduleTable t = schedule(flat, p, routes, grid(4, 4, 2));
  CHECK(t.find("top/s4")->bus_on({TrackKind::Row, 0}) == 1);
}

TEST_CASE("aggregate bandwidth") {
  GridConfig g;
  CHECK(aggregate_bandwidth(g, 322) == 3.29728e12);
  GridConfig unit;
  unit.buses_per_track = 1;
  unit.clock_hz = 1;
  CHECK(aggregate_bandwidth(unit, 1) == 32.0);
  CHECK(aggregate_bandwidth(g, 0) == 0.0);
}

TEST_CASE("compile is deterministic and the artifact round-trips") {
  std::string src = picotest::read_fixture("hier3.pg");
  CompiledArtifact a = build_artifact(src);
  CompiledArtifact b = build_artifact(src);
  CHECK(a == b);
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(artifact_from_json(to_json(a)) == a);
  std::string path = picotest::temp_path("hier3.pgc");
  save_artifact(a, path);
  CHECK(load_artifact(path) == a);
  CHECK_THROWS_AS(load_artifact(picotest::temp_path("missing.pgc")), MissingFile);
}

TEST_CASE("every signal gets L/period opportunities and no cell is shared") {
  std::mt19937 rng(5);
  for (int k = 0; k < 40; ++k) {
    picotest::RandomDesignOptions o;
    o.instances = 3 + static_cast<int>(rng() % 8);
    auto [src, a] = picotest::random_compiled(rng, o);
    const ScheduleTable& t = a->schedule;
    std::map<std::tuple<Segment, int, int>, int> cells;
    for (const auto& e : t.entries) {
      int opps = 0;
      for (int slot = 0; slot < t.frame_length; ++slot) {
        if (slot % e.period != e.offset) continue;
        ++opps;
        for (const auto& seg : a->routes.at(e.signal).segments) ++cells[{seg, e.bus_on(seg.track_id()), slot}];
      }
      CHECK(opps == t.frame_length / e.period);
    }
    for (const auto& [cell, n] : cells) CHECK(n == 1);
  }
}
