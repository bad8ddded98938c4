#include "picosim/instruments.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "picosim/fileio.hpp"

namespace pico {

using nlohmann::json;

Program probe_program(const ProbeSpec& spec) {
  std::string text;
  switch (spec.kind) {
    case ProbeKind::Trace:
      text = "loop: GET r0, tap0 BR loop";
      break;
    case ProbeKind::AssertBandwidth:
      text = "CONST r3, 1 loop: GET r0, tap0 ADD r2, r2, r3 BR loop";
      break;
    case ProbeKind::Ber:
      text = "loop: GET r0, tap0 GET r1, tap1 XOR r2, r0, r1 BR loop";
      break;
    case ProbeKind::AssertPredicate: {
      // r4 = 1 when the predicate holds, r2 counts failures.
      std::string test;
      switch (spec.cmp) {
        case Comparator::Eq:
          test = "CMPEQ r4, r0, r1";
          break;
        case Comparator::Ne:
          test = "CMPEQ r5, r0, r1 XOR r4, r5, r3";
          break;
        case Comparator::Lt:
          test = "CMPLT r4, r0, r1";
          break;
        case Comparator::Ge:
          test = "CMPLT r5, r0, r1 XOR r4, r5, r3";
          break;
        case Comparator::Gt:
          test = "CMPLT r4, r1, r0";
          break;
        case Comparator::Le:
          test = "CMPLT r5, r1, r0 XOR r4, r5, r3";
          break;
      }
      text = "CONST r1, " + std::to_string(spec.constant) + " CONST r3, 1 loop: GET r0, tap0 " + test +
             " BRZ r4, fail BR loop fail: ADD r2, r2, r3 BR loop";
      break;
    }
  }
  return parse_program(text);
}

namespace {

void validate_spec(const CompiledArtifact& a, ProbeSpec& spec) {
  std::size_t want = spec.kind == ProbeKind::Ber ? 2 : 1;
  if (spec.signals.size() != want) {
    throw BadSpec(std::string(to_string(spec.kind)) + " probe takes " + std::to_string(want) + " signal(s)");
  }
  for (auto& s : spec.signals) {
    int idx = a.design.find_signal(s);
    if (idx < 0) throw UnknownSignal("unknown signal '" + s + "'");
    s = a.design.signals[idx].id;
  }
  if (spec.kind == ProbeKind::Ber) {
    const ValueType& t0 = a.design.signals[a.design.signal_index(spec.signals[0])].type;
    const ValueType& t1 = a.design.signals[a.design.signal_index(spec.signals[1])].type;
    if (!(t0 == t1)) {
      throw TypeMismatch("ber targets differ in type: " + t0.describe() + " vs " + t1.describe());
    }
    if (spec.signals[0] == spec.signals[1]) throw BadSpec("ber needs two distinct signals");
  }
  if (spec.kind == ProbeKind::AssertBandwidth) {
    if (spec.floor < 0.0 || spec.floor > 1.0) throw BadSpec("bandwidth floor must lie in [0, 1]");
    if (spec.window < a.schedule.frame_length) {
      throw BadSpec("bandwidth window must be at least one frame (" + std::to_string(a.schedule.frame_length) +
                    " cycles)");
    }
  }
}

// Destination coordinates a signal's route must reach: design endpoints plus
// every probe already tapping it.
std::vector<Coord> route_targets(const CompiledArtifact& a, const FlatSignal& sig) {
  std::vector<Coord> out;
  for (const auto& d : sig.dests) out.push_back(a.placement.of(d.instance));
  for (const auto& p : a.probes) {
    if (std::find(p.spec.signals.begin(), p.spec.signals.end(), sig.id) != p.spec.signals.end()) out.push_back(p.at);
  }
  return out;
}

// Extends every target route to `at`. Returns false when some extension
// cannot reuse the signal's slots conflict-free.
bool try_extend(CompiledArtifact& a, const std::vector<std::string>& signals, Coord at) {
  for (const auto& id : signals) {
    const FlatSignal& sig = a.design.signals[a.design.signal_index(id)];
    std::vector<Coord> targets = route_targets(a, sig);
    targets.push_back(at);
    Route grown = route_tree(sig.id, a.placement.of(sig.source.instance), targets);
    Route& route = a.routes.at(sig.id);
    std::vector<Segment> extra;
    std::set_difference(grown.segments.begin(), grown.segments.end(), route.segments.begin(), route.segments.end(),
                        std::back_inserter(extra));

    SlotOccupancy occ = occupancy_of(a.schedule, a.routes);
    SlotAssignment& slot = *a.schedule.find(sig.id);
    std::map<TrackId, std::vector<Segment>> by_track;
    for (const auto& seg : extra) by_track[seg.track_id()].push_back(seg);
    for (const auto& [track, segs] : by_track) {
      int bus = slot.bus_on(track);
      auto fits = [&](int b) {
        return std::all_of(segs.begin(), segs.end(),
                           [&](const Segment& s) { return occ.is_free(s, b, slot.period, slot.offset); });
      };
      if (bus >= 0) {
        if (!fits(bus)) return false;
        continue;
      }
      for (int b = 0; b < a.grid.buses_per_track && bus < 0; ++b) {
        if (fits(b)) bus = b;
      }
      if (bus < 0) return false;
      slot.buses.push_back({track, bus});
    }
    std::sort(slot.buses.begin(), slot.buses.end(),
              [](const TrackBus& x, const TrackBus& y) { return x.track < y.track; });
    route.segments = grown.segments;
    route.switches = grown.switches;
    route.local_loop = route.segments.empty();
  }
  return true;
}

}  // namespace

CompiledArtifact insert_probe(const CompiledArtifact& artifact, ProbeSpec spec) {
  validate_spec(artifact, spec);
  if (artifact.placement.reserve.empty()) throw NoReserveError("probe reserve is exhausted");

  Coord source = artifact.placement.of(
      artifact.design.signals[artifact.design.signal_index(spec.signals[0])].source.instance);
  std::vector<Coord> candidates = artifact.placement.reserve;
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](Coord x, Coord y) { return manhattan(x, source) < manhattan(y, source); });

  for (Coord at : candidates) {
    CompiledArtifact next = artifact;
    if (!try_extend(next, spec.signals, at)) continue;
    auto& reserve = next.placement.reserve;
    reserve.erase(std::find(reserve.begin(), reserve.end(), at));
    ProbeInstance probe;
    probe.path = "probe" + std::to_string(next.probes.size());
    probe.program = probe_program(spec);
    probe.spec = std::move(spec);
    probe.at = at;
    next.probes.push_back(std::move(probe));
    return next;
  }
  throw TapRouteError("no reserve coordinate reachable from " + spec.signals[0] + " within its slots");
}

FileBinding parse_binding(std::string_view text) {
  auto eq = text.find('=');
  auto colon = text.rfind(':');
  if (eq == std::string_view::npos || colon == std::string_view::npos || colon < eq) {
    throw BadSpec("binding must look like in=path:signal or out=path:signal");
  }
  std::string_view dir = text.substr(0, eq);
  FileBinding b;
  if (dir == "in" || dir == "input") {
    b.dir = BindDirection::Input;
  } else if (dir == "out" || dir == "output") {
    b.dir = BindDirection::Output;
  } else {
    throw BadSpec("binding direction must be in or out, not '" + std::string(dir) + "'");
  }
  b.path = std::string(text.substr(eq + 1, colon - eq - 1));
  b.signal = std::string(text.substr(colon + 1));
  if (b.path.empty() || b.signal.empty()) throw BadSpec("binding needs both a path and a signal");
  return b;
}

CompiledArtifact bind_file(const CompiledArtifact& artifact, FileBinding binding) {
  const FlatDesign& flat = artifact.design;
  int s = flat.find_signal(binding.signal);
  if (s < 0) throw UnknownSignal("unknown signal '" + binding.signal + "'");
  const FlatSignal& sig = flat.signals[s];
  binding.signal = sig.id;
  if (binding.dir == BindDirection::Input) {
    if (flat.instances[flat.instance_index(sig.source.instance)].builtin != Builtin::FileSource) {
      throw BadSpec("signal " + sig.id + " is not driven by a file_source");
    }
    read_value_file(binding.path, sig.type);
  } else {
    bool sink = std::any_of(sig.dests.begin(), sig.dests.end(), [&](const FlatEndpoint& d) {
      return flat.instances[flat.instance_index(d.instance)].builtin == Builtin::FileSink;
    });
    if (!sink) throw BadSpec("signal " + sig.id + " has no file_sink destination");
  }
  CompiledArtifact next = artifact;
  std::erase_if(next.bindings,
                [&](const FileBinding& b) { return b.dir == binding.dir && b.signal == binding.signal; });
  next.bindings.push_back(std::move(binding));
  return next;
}

BandwidthVerdict check_bandwidth_assertion(std::span<const TraceEvent> trace, const Machine& m,
                                           std::string_view signal, double floor, std::uint64_t window,
                                           std::uint64_t end_cycle) {
  int s = m.signal_index(signal);
  if (s < 0) throw UnknownSignal("unknown signal '" + std::string(signal) + "'");
  if (window < static_cast<std::uint64_t>(m.frame_length)) {
    throw BadSpec("bandwidth window must be at least one frame (" + std::to_string(m.frame_length) + " cycles)");
  }
  const MachineSignal& sig = m.signals[s];
  std::vector<std::uint64_t> counts(end_cycle / window, 0);
  for (const auto& e : trace) {
    if (e.kind == EventKind::Transfer && e.signal == s && e.cycle / window < counts.size()) ++counts[e.cycle / window];
  }
  BandwidthVerdict v;
  v.windows = counts.size();
  for (std::size_t k = 0; k < counts.size(); ++k) {
    std::uint64_t offered = opportunities(k * window, window, sig.period, sig.offset);
    double util = offered ? static_cast<double>(counts[k]) / static_cast<double>(offered) : 1.0;
    v.worst = std::min(v.worst, util);
    if (util < floor && v.pass) {
      v.pass = false;
      v.failed_at = (k + 1) * window - 1;
    }
  }
  return v;
}

BerResult ber(std::span<const std::uint32_t> test, std::span<const std::uint32_t> reference, int width) {
  if (width < 1 || width > 32) throw BadSpec("ber width must lie in 1..32");
  const std::uint32_t mask = width == 32 ? 0xffffffffu : ((1u << width) - 1u);
  std::size_t pairs = std::min(test.size(), reference.size());
  BerResult r;
  for (std::size_t i = 0; i < pairs; ++i) r.errors += static_cast<std::uint64_t>(std::popcount((test[i] ^ reference[i]) & mask));
  r.total_bits = pairs * static_cast<std::uint64_t>(width);
  r.rate = r.total_bits ? static_cast<double>(r.errors) / static_cast<double>(r.total_bits) : 0.0;
  return r;
}

BerResult ber(std::span<const std::uint32_t> test, const ValueType& test_type,
              std::span<const std::uint32_t> reference, const ValueType& reference_type) {
  if (test_type.width != reference_type.width) {
    throw TypeMismatch("ber streams differ in width: " + std::to_string(test_type.width) + " vs " +
                       std::to_string(reference_type.width));
  }
  return ber(test, reference, test_type.width);
}

std::vector<std::uint32_t> transferred_values(std::span<const TraceEvent> trace, int signal) {
  std::vector<std::uint32_t> out;
  for (const auto& e : trace) {
    if (e.kind == EventKind::Transfer && e.signal == signal) out.push_back(e.value);
  }
  return out;
}

json probe_report(const SystemState& state) {
  const Machine& m = state.m();
  const auto& probes = m.artifact->probes;
  json out = json::array();
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const ProbeInstance& probe = probes[p];
    const ProbeMonitor& mon = state.monitors[p];
    json j = {{"probe", probe.path},
              {"spec", probe.spec.text()},
              {"at", {probe.at.row, probe.at.col}},
              {"observations", mon.observations},
              {"drops", mon.drops},
              {"tap_arrivals", mon.tap_arrivals}};
    switch (probe.spec.kind) {
      case ProbeKind::Trace:
        j["verdict"] = mon.drops ? "lossy" : "complete";
        break;
      case ProbeKind::AssertPredicate:
      case ProbeKind::AssertBandwidth:
        j["verdict"] = mon.failures ? "fail" : "pass";
        j["failures"] = mon.failures;
        j["first_failure"] = mon.first_failure ? json(*mon.first_failure) : json(nullptr);
        break;
      case ProbeKind::Ber: {
        const int width = m.artifact->design.signals[m.aes[m.design_aes + p].ports[0].signal].type.width;
        std::uint64_t bits = mon.ber_pairs * static_cast<std::uint64_t>(width);
        j["verdict"] = mon.ber_errors ? "errors" : "clean";
        j["pairs"] = mon.ber_pairs;
        j["errors"] = mon.ber_errors;
        j["total_bits"] = bits;
        j["rate"] = bits ? static_cast<double>(mon.ber_errors) / static_cast<double>(bits) : 0.0;
        break;
      }
    }
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace pico
