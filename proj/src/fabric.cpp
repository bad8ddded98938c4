#include "picosim/fabric.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <set>

namespace pico {

SchedulingConflict::SchedulingConflict(std::string signal, std::vector<Blocker> blockers)
    : Error([&] {
        std::string msg = "cannot schedule signal " + signal;
        for (const auto& b : blockers) {
          msg += "; offset " + std::to_string(b.offset) + " blocked by";
          for (const auto& s : b.signals) msg += " " + s;
          if (b.signals.empty()) msg += " (no free bus)";
        }
        return msg;
      }()),
      signal_(std::move(signal)),
      blockers_(std::move(blockers)) {}

void GridConfig::validate() const {
  if (rows < 1 || cols < 1) throw Error("grid must have at least one row and one column");
  if (buses_per_track < 1) throw Error("buses_per_track must be at least 1");
  if (bus_width != 32) throw Error("bus width is fixed at 32 bits");
  if (buffer_depth < 1) throw Error("buffer_depth must be at least 1");
  if (!(clock_hz > 0)) throw Error("clock_hz must be positive");
  if (probe_reserve < 0 || probe_reserve >= 1) throw Error("probe_reserve must be in [0, 1)");
  if (probe_buffer_depth < 1) throw Error("probe_buffer_depth must be at least 1");
}

int GridConfig::reserve_count() const {
  return static_cast<int>(std::ceil(probe_reserve * cells() - 1e-9));
}

GridConfig default_grid(std::size_t instances) {
  GridConfig g;
  int side = 1;
  for (;;) {
    g.rows = g.cols = side;
    if (static_cast<std::size_t>(g.cells() - g.reserve_count()) >= instances) return g;
    ++side;
  }
}

Coord Placement::of(const std::string& path) const {
  auto it = at.find(path);
  if (it == at.end()) throw UnknownInstance("instance " + path + " is not placed");
  return it->second;
}

// ---------------------------------------------------------------------------
// Placement

Placement place(const FlatDesign& flat, const GridConfig& grid) {
  grid.validate();
  const int n = static_cast<int>(flat.instances.size());
  const int capacity = grid.cells() - grid.reserve_count();
  if (n > capacity) {
    throw CapacityError(std::to_string(n) + " instances do not fit a " + std::to_string(grid.rows) +
                        "x" + std::to_string(grid.cols) + " grid with " +
                        std::to_string(grid.reserve_count()) + " reserved probe elements");
  }

  std::vector<std::vector<int>> adj(n);
  for (const auto& s : flat.signals) {
    int src = flat.instance_index(s.source.instance);
    for (const auto& d : s.dests) {
      int dst = flat.instance_index(d.instance);
      if (src < 0 || dst < 0 || src == dst) continue;
      adj[src].push_back(dst);
      adj[dst].push_back(src);
    }
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());

  // Breadth-first from the highest-degree unplaced instance; instance indices
  // are already in path order, which breaks ties.
  std::vector<int> order;
  std::vector<bool> queued(n, false);
  for (;;) {
    int root = -1;
    for (int i = 0; i < n; ++i) {
      if (!queued[i] && (root < 0 || adj[i].size() > adj[root].size())) root = i;
    }
    if (root < 0) break;
    std::deque<int> q{root};
    queued[root] = true;
    while (!q.empty()) {
      int v = q.front();
      q.pop_front();
      order.push_back(v);
      for (int w : adj[v]) {
        if (!queued[w]) {
          queued[w] = true;
          q.push_back(w);
        }
      }
    }
  }

  const Coord center{(grid.rows - 1) / 2, (grid.cols - 1) / 2};
  std::vector<std::vector<bool>> used(grid.rows, std::vector<bool>(grid.cols, false));
  std::vector<Coord> pos(n);
  std::vector<bool> placed(n, false);
  for (int v : order) {
    bool has_neighbor = std::any_of(adj[v].begin(), adj[v].end(), [&](int w) { return placed[w]; });
    Coord best{};
    long best_cost = std::numeric_limits<long>::max();
    for (int r = 0; r < grid.rows; ++r) {
      for (int c = 0; c < grid.cols; ++c) {
        if (used[r][c]) continue;
        Coord here{r, c};
        long cost = 0;
        if (has_neighbor) {
          for (int w : adj[v]) {
            if (placed[w]) cost += manhattan(here, pos[w]);
          }
        } else {
          cost = manhattan(here, center);
        }
        if (cost < best_cost) {
          best_cost = cost;
          best = here;
        }
      }
    }
    used[best.row][best.col] = true;
    pos[v] = best;
    placed[v] = true;
  }

  Placement out;
  for (int i = 0; i < n; ++i) out.at[flat.instances[i].path] = pos[i];
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      if (!used[r][c]) out.reserve.push_back({r, c});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Routing

Route route_tree(std::string signal, Coord source, std::span<const Coord> dests) {
  Route route;
  route.signal = std::move(signal);
  std::set<Segment> segs;
  std::set<Coord> switches;
  int lo_col = source.col;
  int hi_col = source.col;
  std::map<int, std::pair<int, int>> column_extent;  // col -> [min row, max row]
  for (Coord d : dests) {
    lo_col = std::min(lo_col, d.col);
    hi_col = std::max(hi_col, d.col);
    if (d.row != source.row) {
      auto [it, fresh] = column_extent.try_emplace(d.col, source.row, source.row);
      it->second.first = std::min(it->second.first, d.row);
      it->second.second = std::max(it->second.second, d.row);
    }
  }
  for (int c = lo_col; c < hi_col; ++c) segs.insert({TrackKind::Row, source.row, c});
  for (const auto& [col, extent] : column_extent) {
    for (int r = extent.first; r < extent.second; ++r) segs.insert({TrackKind::Column, col, r});
    switches.insert({source.row, col});
  }
  route.segments.assign(segs.begin(), segs.end());
  route.switches.assign(switches.begin(), switches.end());
  route.local_loop = route.segments.empty();
  return route;
}

Route route_signal(const Placement& placement, const FlatSignal& signal, const GridConfig& grid) {
  Coord src = placement.of(signal.source.instance);
  std::vector<Coord> dests;
  for (const auto& d : signal.dests) {
    Coord c = placement.of(d.instance);
    if (c.row >= grid.rows || c.col >= grid.cols) throw Error("placement outside grid");
    dests.push_back(c);
  }
  return route_tree(signal.id, src, dests);
}

RouteMap route_all(const FlatDesign& flat, const Placement& placement, const GridConfig& grid) {
  RouteMap routes;
  for (const auto& s : flat.signals) routes.emplace(s.id, route_signal(placement, s, grid));
  return routes;
}

// ---------------------------------------------------------------------------
// Scheduling

int SlotAssignment::bus_on(TrackId track) const {
  for (const auto& tb : buses) {
    if (tb.track == track) return tb.bus;
  }
  return -1;
}

const SlotAssignment* ScheduleTable::find(std::string_view signal) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), signal,
                             [](const SlotAssignment& a, std::string_view s) { return a.signal < s; });
  return it != entries.end() && it->signal == signal ? &*it : nullptr;
}

SlotAssignment* ScheduleTable::find(std::string_view signal) {
  return const_cast<SlotAssignment*>(std::as_const(*this).find(signal));
}

std::uint64_t SlotOccupancy::key(const Segment& seg, int bus) {
  return (static_cast<std::uint64_t>(seg.kind) << 56) | (static_cast<std::uint64_t>(seg.track) << 40) |
         (static_cast<std::uint64_t>(seg.span) << 16) | static_cast<std::uint64_t>(bus);
}

bool SlotOccupancy::is_free(const Segment& seg, int bus, int period, int offset) const {
  auto it = cells_.find(key(seg, bus));
  if (it == cells_.end()) return true;
  for (int s = offset; s < frame_; s += period) {
    if (it->second[s] >= 0) return false;
  }
  return true;
}

void SlotOccupancy::claim(const Segment& seg, int bus, int period, int offset, int owner) {
  auto& slots = cells_[key(seg, bus)];
  if (slots.empty()) slots.assign(frame_, -1);
  for (int s = offset; s < frame_; s += period) slots[s] = owner;
}

std::vector<int> SlotOccupancy::blockers(const Segment& seg, int bus, int period, int offset) const {
  std::vector<int> out;
  auto it = cells_.find(key(seg, bus));
  if (it == cells_.end()) return out;
  for (int s = offset; s < frame_; s += period) {
    int o = it->second[s];
    if (o >= 0 && std::find(out.begin(), out.end(), o) == out.end()) out.push_back(o);
  }
  return out;
}

SlotOccupancy occupancy_of(const ScheduleTable& table, const RouteMap& routes) {
  SlotOccupancy occ(table.frame_length);
  for (std::size_t i = 0; i < table.entries.size(); ++i) {
    const auto& e = table.entries[i];
    auto it = routes.find(e.signal);
    if (it == routes.end()) continue;
    for (const auto& seg : it->second.segments) {
      occ.claim(seg, e.bus_on(seg.track_id()), e.period, e.offset, static_cast<int>(i));
    }
  }
  return occ;
}

namespace {

struct TrackGroup {
  TrackId track;
  std::vector<Segment> segments;
};

struct Pending {
  int signal = 0;  // index into flat.signals
  int period = 1;
  std::vector<TrackGroup> groups;
};

class Scheduler {
 public:
  Scheduler(const FlatDesign& flat, const RouteMap& routes, const GridConfig& grid,
            const ScheduleOptions& options)
      : flat_(flat), grid_(grid), options_(options) {
    int frame = 1;
    for (const auto& s : flat.signals) frame = std::max(frame, s.period);
    frame_ = frame;
    for (std::size_t i = 0; i < flat.signals.size(); ++i) {
      const auto& s = flat.signals[i];
      auto it = routes.find(s.id);
      if (it == routes.end()) throw Error("signal " + s.id + " has no route");
      Pending p;
      p.signal = static_cast<int>(i);
      p.period = s.period;
      for (const auto& seg : it->second.segments) {
        if (p.groups.empty() || p.groups.back().track != seg.track_id()) {
          p.groups.push_back({seg.track_id(), {}});
        }
        p.groups.back().segments.push_back(seg);
      }
      pending_.push_back(std::move(p));
    }
    // Highest bandwidth first; ties by id (flat order).
    std::stable_sort(pending_.begin(), pending_.end(),
                     [](const Pending& a, const Pending& b) { return a.period < b.period; });
    result_.frame_length = frame_;
    result_.entries.resize(flat.signals.size());
    for (std::size_t i = 0; i < flat.signals.size(); ++i) {
      result_.entries[i].signal = flat.signals[i].id;
      result_.entries[i].period = flat.signals[i].period;
    }
  }

  ScheduleTable run() {
    SlotOccupancy occ(frame_);
    for (const auto& p : pending_) {
      if (!greedy(p, occ)) {
        auto blockers = blockers_for(p, occ);
        SlotOccupancy fresh(frame_);
        budget_ = options_.search_budget;
        if (exact(0, fresh)) return result_;
        throw SchedulingConflict(flat_.signals[p.signal].id, std::move(blockers));
      }
    }
    return result_;
  }

 private:
  bool group_free(const TrackGroup& g, int bus, int period, int offset, const SlotOccupancy& occ) const {
    return std::all_of(g.segments.begin(), g.segments.end(),
                       [&](const Segment& s) { return occ.is_free(s, bus, period, offset); });
  }

  void commit(const Pending& p, int offset, const std::vector<int>& buses, SlotOccupancy& occ) {
    auto& e = result_.entries[p.signal];
    e.offset = offset;
    e.buses.clear();
    for (std::size_t g = 0; g < p.groups.size(); ++g) {
      e.buses.push_back({p.groups[g].track, buses[g]});
      for (const auto& s : p.groups[g].segments) occ.claim(s, buses[g], p.period, offset, p.signal);
    }
  }

  void release(const Pending& p, int offset, const std::vector<int>& buses, SlotOccupancy& occ) {
    for (std::size_t g = 0; g < p.groups.size(); ++g) {
      for (const auto& s : p.groups[g].segments) occ.claim(s, buses[g], p.period, offset, -1);
    }
  }

  // First-fit offset on the preferred bus; then first-fit offset with the
  // lowest free alternate bus per track.
  bool greedy(const Pending& p, SlotOccupancy& occ) {
    const std::size_t ng = p.groups.size();
    for (int o = 0; o < p.period; ++o) {
      bool ok = true;
      for (const auto& g : p.groups) ok = ok && group_free(g, 0, p.period, o, occ);
      if (ok) {
        commit(p, o, std::vector<int>(ng, 0), occ);
        return true;
      }
    }
    for (int o = 0; o < p.period; ++o) {
      std::vector<int> buses;
      for (const auto& g : p.groups) {
        int chosen = -1;
        for (int b = 0; b < grid_.buses_per_track && chosen < 0; ++b) {
          if (group_free(g, b, p.period, o, occ)) chosen = b;
        }
        if (chosen < 0) break;
        buses.push_back(chosen);
      }
      if (buses.size() == ng) {
        commit(p, o, buses, occ);
        return true;
      }
    }
    return false;
  }

  std::vector<SchedulingConflict::Blocker> blockers_for(const Pending& p, const SlotOccupancy& occ) const {
    std::vector<SchedulingConflict::Blocker> out;
    for (int o = 0; o < p.period; ++o) {
      std::set<std::string> names;
      for (const auto& g : p.groups) {
        for (const auto& s : g.segments) {
          for (int b = 0; b < grid_.buses_per_track; ++b) {
            for (int owner : occ.blockers(s, b, p.period, o)) names.insert(flat_.signals[owner].id);
          }
        }
      }
      out.push_back({o, {names.begin(), names.end()}});
    }
    return out;
  }

  // Complete backtracking over offsets and per-track buses, same order and
  // candidate preference as the greedy pass.
  bool exact(std::size_t k, SlotOccupancy& occ) {
    if (k == pending_.size()) return true;
    const Pending& p = pending_[k];
    std::vector<int> buses(p.groups.size(), 0);
    for (int o = 0; o < p.period; ++o) {
      if (exact_group(k, o, 0, buses, occ)) return true;
      if (budget_ == 0) return false;
    }
    return false;
  }

  bool exact_group(std::size_t k, int offset, std::size_t g, std::vector<int>& buses, SlotOccupancy& occ) {
    if (budget_ == 0) return false;
    --budget_;
    const Pending& p = pending_[k];
    if (g == p.groups.size()) {
      commit(p, offset, buses, occ);
      if (exact(k + 1, occ)) return true;
      release(p, offset, buses, occ);
      return false;
    }
    for (int b = 0; b < grid_.buses_per_track; ++b) {
      if (!group_free(p.groups[g], b, p.period, offset, occ)) continue;
      buses[g] = b;
      if (exact_group(k, offset, g + 1, buses, occ)) return true;
      if (budget_ == 0) return false;
    }
    return false;
  }

  const FlatDesign& flat_;
  const GridConfig& grid_;
  ScheduleOptions options_;
  int frame_ = 1;
  std::vector<Pending> pending_;
  ScheduleTable result_;
  std::uint64_t budget_ = 0;
};

}  // namespace

ScheduleTable schedule(const FlatDesign& flat, const Placement& placement, const RouteMap& routes,
                       const GridConfig& grid, const ScheduleOptions& options) {
  grid.validate();
  for (const auto& s : flat.signals) {
    placement.of(s.source.instance);
    for (const auto& d : s.dests) placement.of(d.instance);
  }
  return Scheduler(flat, routes, grid, options).run();
}

double aggregate_bandwidth(const GridConfig& grid, std::uint64_t ae_count) {
  return static_cast<double>(ae_count) * grid.buses_per_track * grid.bus_width * grid.clock_hz;
}

}  // namespace pico
