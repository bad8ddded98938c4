#pragma once

#include <compare>
#include <cstdlib>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "picosim/netlist.hpp"

namespace pico {

struct Coord {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const Coord&, const Coord&) = default;
};

inline int manhattan(Coord a, Coord b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); }

struct GridConfig {
  int rows = 4;
  int cols = 4;
  int buses_per_track = 2;
  double clock_hz = 160e6;
  int bus_width = 32;
  int buffer_depth = 1;
  double probe_reserve = 0.05;  // fraction of the grid left unused for probes
  int probe_buffer_depth = 16;

  void validate() const;
  int cells() const { return rows * cols; }
  // ceil(probe_reserve * cells), at least 0.
  int reserve_count() const;
  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

// Smallest square grid holding `instances` elements plus the probe reserve.
GridConfig default_grid(std::size_t instances);

struct Placement {
  std::map<std::string, Coord> at;
  std::vector<Coord> reserve;  // unused coordinates, row-major

  Coord of(const std::string& path) const;
  friend bool operator==(const Placement&, const Placement&) = default;
};

enum class TrackKind : std::uint8_t { Row, Column };

struct TrackId {
  TrackKind kind = TrackKind::Row;
  int index = 0;
  friend auto operator<=>(const TrackId&, const TrackId&) = default;
};

// Bus span between two adjacent switch positions. Row track r, span c joins
// (r,c) and (r,c+1); column track c, span r joins (r,c) and (r+1,c).
struct Segment {
  TrackKind kind = TrackKind::Row;
  int track = 0;
  int span = 0;
  TrackId track_id() const { return {kind, track}; }
  friend auto operator<=>(const Segment&, const Segment&) = default;
};

struct Route {
  std::string signal;
  std::vector<Segment> segments;  // sorted, unique
  std::vector<Coord> switches;    // row-to-column turn points
  bool local_loop = false;
  friend bool operator==(const Route&, const Route&) = default;
};

using RouteMap = std::map<std::string, Route>;

struct TrackBus {
  TrackId track;
  int bus = 0;
  friend bool operator==(const TrackBus&, const TrackBus&) = default;
};

struct SlotAssignment {
  std::string signal;
  int period = 1;
  int offset = 0;
  std::vector<TrackBus> buses;  // sorted by track

  int bus_on(TrackId track) const;  // -1 when the route does not use the track
  bool fires_at(std::uint64_t cycle) const {
    return static_cast<int>(cycle % static_cast<std::uint64_t>(period)) == offset;
  }
  friend bool operator==(const SlotAssignment&, const SlotAssignment&) = default;
};

struct ScheduleTable {
  int frame_length = 1;
  std::vector<SlotAssignment> entries;  // sorted by signal id

  const SlotAssignment* find(std::string_view signal) const;
  SlotAssignment* find(std::string_view signal);
  friend bool operator==(const ScheduleTable&, const ScheduleTable&) = default;
};

Placement place(const FlatDesign& flat, const GridConfig& grid);

// Source-rooted comb: row segments along the source row, then column
// segments down/up each destination column. Shared spans appear once.
Route route_tree(std::string signal, Coord source, std::span<const Coord> dests);
Route route_signal(const Placement& placement, const FlatSignal& signal, const GridConfig& grid);
RouteMap route_all(const FlatDesign& flat, const Placement& placement, const GridConfig& grid);

// Per-(segment, bus) slot ownership over one frame.
class SlotOccupancy {
 public:
  explicit SlotOccupancy(int frame_length) : frame_(frame_length) {}

  bool is_free(const Segment& seg, int bus, int period, int offset) const;
  void claim(const Segment& seg, int bus, int period, int offset, int owner);
  // Owners (distinct) that would collide with the given claim.
  std::vector<int> blockers(const Segment& seg, int bus, int period, int offset) const;
  int frame_length() const { return frame_; }

 private:
  static std::uint64_t key(const Segment& seg, int bus);
  int frame_;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

SlotOccupancy occupancy_of(const ScheduleTable& table, const RouteMap& routes);

struct ScheduleOptions {
  // Node budget for the exact search tried when greedy first-fit fails.
  std::uint64_t search_budget = 2'000'000;
};

ScheduleTable schedule(const FlatDesign& flat, const Placement& placement, const RouteMap& routes,
                       const GridConfig& grid, const ScheduleOptions& options = {});

// ae_count x buses_per_track x bus_width x clock_hz, in bits per second.
double aggregate_bandwidth(const GridConfig& grid, std::uint64_t ae_count);

}  // namespace pico
