#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "picosim/artifact.hpp"
#include "picosim/engine.hpp"

namespace pico {

// Probe element program for a spec (ports tap0, tap1).
Program probe_program(const ProbeSpec& spec);

// Places a probe on the first usable reserve coordinate (nearest the target
// signal's source) and extends the target routes to it on the slots the
// signals already own. Throws NoReserveError, TapRouteError, UnknownSignal,
// TypeMismatch (ber targets of different types) or BadSpec.
CompiledArtifact insert_probe(const CompiledArtifact& artifact, ProbeSpec spec);

// "in=path:signal" / "out=path:signal"; "input"/"output" also accepted.
FileBinding parse_binding(std::string_view text);

// Replaces any binding of the same direction and signal. Input files are read
// to validate them: throws MissingFile, FileFormatError, UnknownSignal, BadSpec.
CompiledArtifact bind_file(const CompiledArtifact& artifact, FileBinding binding);

struct BandwidthVerdict {
  bool pass = true;
  std::optional<std::uint64_t> failed_at;  // last cycle of the first failing window
  std::uint64_t windows = 0;
  double worst = 1.0;
  friend bool operator==(const BandwidthVerdict&, const BandwidthVerdict&) = default;
};

// Windows [k*window, (k+1)*window) for every complete window before end_cycle.
// Throws UnknownSignal, BadSpec (window shorter than a frame).
BandwidthVerdict check_bandwidth_assertion(std::span<const TraceEvent> trace, const Machine& m,
                                           std::string_view signal, double floor, std::uint64_t window,
                                           std::uint64_t end_cycle);

struct BerResult {
  std::uint64_t errors = 0;
  std::uint64_t total_bits = 0;
  double rate = 0.0;
  friend bool operator==(const BerResult&, const BerResult&) = default;
};

BerResult ber(std::span<const std::uint32_t> test, std::span<const std::uint32_t> reference, int width);
// Throws TypeMismatch when the widths differ.
BerResult ber(std::span<const std::uint32_t> test, const ValueType& test_type,
              std::span<const std::uint32_t> reference, const ValueType& reference_type);

// Values carried by `signal` in transfer events, in order.
std::vector<std::uint32_t> transferred_values(std::span<const TraceEvent> trace, int signal);

// Per probe: path, spec, observations, drops, verdict and kind-specific figures.
nlohmann::json probe_report(const SystemState& state);

}  // namespace pico
