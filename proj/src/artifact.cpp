#include "picosim/artifact.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pico {

using nlohmann::json;

std::string_view to_string(ProbeKind k) {
  switch (k) {
    case ProbeKind::Trace:
      return "trace";
    case ProbeKind::AssertPredicate:
      return "assert";
    case ProbeKind::AssertBandwidth:
      return "bandwidth";
    case ProbeKind::Ber:
      return "ber";
  }
  return "?";
}

std::string_view to_string(Comparator c) {
  switch (c) {
    case Comparator::Eq:
      return "eq";
    case Comparator::Ne:
      return "ne";
    case Comparator::Lt:
      return "lt";
    case Comparator::Le:
      return "le";
    case Comparator::Gt:
      return "gt";
    case Comparator::Ge:
      return "ge";
  }
  return "?";
}

bool compare(Comparator c, std::uint32_t lhs, std::uint32_t rhs) {
  switch (c) {
    case Comparator::Eq:
      return lhs == rhs;
    case Comparator::Ne:
      return lhs != rhs;
    case Comparator::Lt:
      return lhs < rhs;
    case Comparator::Le:
      return lhs <= rhs;
    case Comparator::Gt:
      return lhs > rhs;
    case Comparator::Ge:
      return lhs >= rhs;
  }
  return false;
}

std::string ProbeSpec::text() const {
  std::ostringstream os;
  os << to_string(kind);
  for (const auto& s : signals) os << ' ' << s;
  if (kind == ProbeKind::AssertPredicate) os << ' ' << to_string(cmp) << ' ' << constant;
  if (kind == ProbeKind::AssertBandwidth) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, floor);
    os << ' ' << std::string_view(buf, res.ptr - buf) << ' ' << window;
  }
  return os.str();
}

namespace {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream is{std::string(text)};
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

std::uint32_t parse_u32(const std::string& s, std::string_view what) {
  std::uint64_t v = 0;
  int base = 10;
  std::string_view digits = s;
  if (digits.size() > 2 && digits[0] == '0' && (digits[1] == 'x' || digits[1] == 'X')) {
    base = 16;
    digits.remove_prefix(2);
  }
  auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v, base);
  if (ec != std::errc() || p != digits.data() + digits.size() || v > 0xffffffffull) {
    throw BadSpec("bad " + std::string(what) + " '" + s + "'");
  }
  return static_cast<std::uint32_t>(v);
}

Comparator parse_comparator(const std::string& s) {
  if (s == "eq" || s == "==") return Comparator::Eq;
  if (s == "ne" || s == "!=") return Comparator::Ne;
  if (s == "lt" || s == "<") return Comparator::Lt;
  if (s == "le" || s == "<=") return Comparator::Le;
  if (s == "gt" || s == ">") return Comparator::Gt;
  if (s == "ge" || s == ">=") return Comparator::Ge;
  throw BadSpec("unknown comparator '" + s + "'");
}

}  // namespace

ProbeSpec parse_probe_spec(std::string_view text) {
  auto w = split_words(text);
  if (w.empty()) throw BadSpec("empty probe spec");
  ProbeSpec spec;
  auto need = [&](std::size_t n, const char* usage) {
    if (w.size() != n) throw BadSpec(std::string("usage: ") + usage);
  };
  if (w[0] == "trace") {
    need(2, "trace <signal>");
    spec.kind = ProbeKind::Trace;
    spec.signals = {w[1]};
  } else if (w[0] == "assert") {
    need(4, "assert <signal> <eq|ne|lt|le|gt|ge> <constant>");
    spec.kind = ProbeKind::AssertPredicate;
    spec.signals = {w[1]};
    spec.cmp = parse_comparator(w[2]);
    spec.constant = parse_u32(w[3], "constant");
  } else if (w[0] == "bandwidth") {
    need(4, "bandwidth <signal> <floor> <window>");
    spec.kind = ProbeKind::AssertBandwidth;
    spec.signals = {w[1]};
    try {
      std::size_t used = 0;
      spec.floor = std::stod(w[2], &used);
      if (used != w[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw BadSpec("bad bandwidth floor '" + w[2] + "'");
    }
    if (!(spec.floor >= 0.0 && spec.floor <= 1.0)) throw BadSpec("bandwidth floor must be in [0, 1]");
    std::uint32_t window = parse_u32(w[3], "window");
    if (window < 1 || window > (1u << 30)) throw BadSpec("window must be positive");
    spec.window = static_cast<int>(window);
  } else if (w[0] == "ber") {
    need(3, "ber <test-signal> <reference-signal>");
    spec.kind = ProbeKind::Ber;
    spec.signals = {w[1], w[2]};
  } else {
    throw BadSpec("unknown probe kind '" + w[0] + "'");
  }
  return spec;
}

CompiledArtifact compile_artifact(FlatDesign design, const GridConfig& grid) {
  CompiledArtifact a;
  a.grid = grid;
  a.placement = place(design, grid);
  a.routes = route_all(design, a.placement, grid);
  a.schedule = schedule(design, a.placement, a.routes, grid);
  a.design = std::move(design);
  return a;
}

CompiledArtifact build_artifact(std::string_view source, std::optional<GridConfig> grid) {
  FlatDesign flat = compile_design(source);
  GridConfig g = grid ? *grid : default_grid(flat.instances.size());
  return compile_artifact(std::move(flat), g);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json coord_json(Coord c) { return json::array({c.row, c.col}); }
Coord coord_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

std::string_view track_kind_name(TrackKind k) { return k == TrackKind::Row ? "row" : "col"; }
TrackKind track_kind_from(const std::string& s) {
  if (s == "row") return TrackKind::Row;
  if (s == "col") return TrackKind::Column;
  throw FormatError("bad track kind '" + s + "'");
}

}  // namespace

json to_json(const GridConfig& g) {
  return {{"rows", g.rows},
          {"cols", g.cols},
          {"buses_per_track", g.buses_per_track},
          {"clock_hz", g.clock_hz},
          {"bus_width", g.bus_width},
          {"buffer_depth", g.buffer_depth},
          {"probe_reserve", g.probe_reserve},
          {"probe_buffer_depth", g.probe_buffer_depth}};
}

GridConfig grid_from_json(const json& j) {
  GridConfig g;
  g.rows = j.at("rows").get<int>();
  g.cols = j.at("cols").get<int>();
  g.buses_per_track = j.at("buses_per_track").get<int>();
  g.clock_hz = j.at("clock_hz").get<double>();
  g.bus_width = j.at("bus_width").get<int>();
  g.buffer_depth = j.at("buffer_depth").get<int>();
  g.probe_reserve = j.value("probe_reserve", 0.05);
  g.probe_buffer_depth = j.value("probe_buffer_depth", 16);
  g.validate();
  return g;
}

json to_json(const CompiledArtifact& a) {
  json placement_at = json::object();
  for (const auto& [path, c] : a.placement.at) placement_at[path] = coord_json(c);
  json reserve = json::array();
  for (Coord c : a.placement.reserve) reserve.push_back(coord_json(c));

  json routes = json::array();
  for (const auto& [id, r] : a.routes) {
    json segs = json::array();
    for (const auto& s : r.segments) segs.push_back({track_kind_name(s.kind), s.track, s.span});
    json sw = json::array();
    for (Coord c : r.switches) sw.push_back(coord_json(c));
    routes.push_back({{"signal", id}, {"segments", segs}, {"switches", sw}, {"local_loop", r.local_loop}});
  }

  json entries = json::array();
  for (const auto& e : a.schedule.entries) {
    json buses = json::array();
    for (const auto& tb : e.buses) {
      buses.push_back({{"kind", track_kind_name(tb.track.kind)}, {"track", tb.track.index}, {"bus", tb.bus}});
    }
    entries.push_back({{"signal", e.signal}, {"period", e.period}, {"offset", e.offset}, {"buses", buses}});
  }

  json probes = json::array();
  for (const auto& p : a.probes) {
    probes.push_back({{"path", p.path},
                      {"spec", p.spec.text()},
                      {"at", coord_json(p.at)},
                      {"program", program_lines(p.program)}});
  }
  json bindings = json::array();
  for (const auto& b : a.bindings) {
    bindings.push_back({{"dir", b.dir == BindDirection::Input ? "in" : "out"},
                        {"path", b.path},
                        {"signal", b.signal}});
  }

  return {{"format", "picosim-compiled"},
          {"version", 1},
          {"design", to_json(a.design)},
          {"grid", to_json(a.grid)},
          {"placement", {{"at", placement_at}, {"reserve", reserve}}},
          {"routes", routes},
          {"schedule", {{"frame_length", a.schedule.frame_length}, {"entries", entries}}},
          {"probes", probes},
          {"bindings", bindings}};
}

CompiledArtifact artifact_from_json(const json& j) {
  if (j.value("format", "") != "picosim-compiled") throw FormatError("not a compiled design");
  if (j.value("version", 0) != 1) throw FormatError("unsupported compiled design version");
  CompiledArtifact a;
  a.design = flat_design_from_json(j.at("design"));
  a.grid = grid_from_json(j.at("grid"));
  for (const auto& [path, c] : j.at("placement").at("at").items()) a.placement.at[path] = coord_from(c);
  for (const auto& c : j.at("placement").at("reserve")) a.placement.reserve.push_back(coord_from(c));
  for (const auto& jr : j.at("routes")) {
    Route r;
    r.signal = jr.at("signal").get<std::string>();
    for (const auto& s : jr.at("segments")) {
      r.segments.push_back({track_kind_from(s.at(0).get<std::string>()), s.at(1).get<int>(), s.at(2).get<int>()});
    }
    for (const auto& c : jr.at("switches")) r.switches.push_back(coord_from(c));
    r.local_loop = jr.at("local_loop").get<bool>();
    a.routes.emplace(r.signal, std::move(r));
  }
  a.schedule.frame_length = j.at("schedule").at("frame_length").get<int>();
  for (const auto& je : j.at("schedule").at("entries")) {
    SlotAssignment e;
    e.signal = je.at("signal").get<std::string>();
    e.period = je.at("period").get<int>();
    e.offset = je.at("offset").get<int>();
    for (const auto& jb : je.at("buses")) {
      e.buses.push_back({{track_kind_from(jb.at("kind").get<std::string>()), jb.at("track").get<int>()},
                         jb.at("bus").get<int>()});
    }
    a.schedule.entries.push_back(std::move(e));
  }
  for (const auto& jp : j.at("probes")) {
    ProbeInstance p;
    p.path = jp.at("path").get<std::string>();
    p.spec = parse_probe_spec(jp.at("spec").get<std::string>());
    p.at = coord_from(jp.at("at"));
    std::string text;
    for (const auto& line : jp.at("program")) text += line.get<std::string>() + "\n";
    p.program = parse_program(text);
    a.probes.push_back(std::move(p));
  }
  for (const auto& jb : j.at("bindings")) {
    FileBinding b;
    b.dir = jb.at("dir").get<std::string>() == "in" ? BindDirection::Input : BindDirection::Output;
    b.path = jb.at("path").get<std::string>();
    b.signal = jb.at("signal").get<std::string>();
    a.bindings.push_back(std::move(b));
  }
  return a;
}

void save_artifact(const CompiledArtifact& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << to_json(a).dump(1) << "\n";
}

CompiledArtifact load_artifact(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  try {
    return artifact_from_json(j);
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace pico
