#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "picosim/artifact.hpp"

namespace pico {

// ---------------------------------------------------------------------------
// Executable view of a compiled artifact. Built once, shared by every state
// derived from it.

struct Op {
  Opcode op = Opcode::Nop;
  std::uint8_t rd = 0, ra = 0, rb = 0;
  std::uint32_t imm = 0;
  int target = -1;
  int port = -1;
};

enum class AeKind { Program, FileSource, FileSink, Probe };

struct MachinePort {
  std::string name;
  Direction dir = Direction::In;
  int signal = -1;
  int capacity = 1;
};

struct MachineAe {
  std::string path;
  AeKind kind = AeKind::Program;
  std::vector<Op> code;
  std::vector<MachinePort> ports;
  int probe = -1;  // index into artifact probes
  bool is_probe() const { return kind == AeKind::Probe; }
};

struct MachineDest {
  int ae = -1;
  int port = -1;
  bool tap = false;  // probe endpoint: never gates readiness, drops on overflow
};

struct MachineSignal {
  std::string id;
  SignalMode mode = SignalMode::Sync;
  int period = 1;
  int offset = 0;
  int src_ae = -1;
  int src_port = -1;
  std::vector<MachineDest> dests;
};

struct Machine {
  std::shared_ptr<const CompiledArtifact> artifact;
  std::vector<MachineAe> aes;  // design instances in path order, then probes
  std::size_t design_aes = 0;
  std::vector<MachineSignal> signals;  // id order
  int frame_length = 1;
  std::vector<std::vector<int>> slot_signals;  // per frame slot, signals that may fire
  std::vector<int> ae_rank;  // position of each AE in path order
  std::vector<std::shared_ptr<const std::vector<std::uint32_t>>> inputs;  // per AE, file sources
  std::vector<std::string> input_paths;   // per AE, bound file sources
  std::vector<std::string> output_paths;  // per AE, bound file sinks

  int ae_index(std::string_view path) const;         // exact path or unique trailing segments
  int signal_index(std::string_view name) const;  // exact id or unique suffix
};

// Reads bound input files; throws MissingFile / FileFormatError.
std::shared_ptr<const Machine> build_machine(std::shared_ptr<const CompiledArtifact> artifact);

// ---------------------------------------------------------------------------
// Trace

enum class EventKind : std::uint8_t { Transfer, Put, Get, Sleep, Wake, Halt, AssertFail, OverwriteLoss };

std::string_view to_string(EventKind k);
std::optional<EventKind> event_kind_from(std::string_view s);

struct TraceEvent {
  std::uint64_t cycle = 0;
  EventKind kind = EventKind::Transfer;
  int signal = -1;    // index into machine signals
  int instance = -1;  // index into machine AEs
  bool has_value = false;
  std::uint32_t value = 0;
  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

// {cycle, kind, signal?, instance?, value?} on one line, fields in that order.
std::string format_event(const Machine& m, const TraceEvent& e);
TraceEvent parse_event(const Machine& m, std::string_view line);
std::vector<TraceEvent> read_trace(const Machine& m, std::istream& in);

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void record(const Machine& m, std::span<const TraceEvent> events) = 0;
};

class VectorSink : public TraceSink {
 public:
  void record(const Machine&, std::span<const TraceEvent> events) override {
    this->events.insert(this->events.end(), events.begin(), events.end());
  }
  std::vector<TraceEvent> events;
};

class JsonlSink : public TraceSink {
 public:
  explicit JsonlSink(std::ostream& out) : out_(out) {}
  void record(const Machine& m, std::span<const TraceEvent> events) override;

 private:
  std::ostream& out_;
};

// Forwards to several sinks.
class TeeSink : public TraceSink {
 public:
  void add(TraceSink* s) { sinks_.push_back(s); }
  void record(const Machine& m, std::span<const TraceEvent> events) override {
    for (auto* s : sinks_) s->record(m, events);
  }

 private:
  std::vector<TraceSink*> sinks_;
};

// ---------------------------------------------------------------------------
// State

enum class AeStatus { Running, SleepingOnPut, SleepingOnGet, Halted };
std::string_view to_string(AeStatus s);

struct PortBuffer {
  int capacity = 1;
  std::deque<std::uint32_t> values;
  bool full() const { return static_cast<int>(values.size()) >= capacity; }
  bool empty() const { return values.empty(); }
  friend bool operator==(const PortBuffer&, const PortBuffer&) = default;
};

struct AeState {
  int pc = 0;
  std::array<std::uint32_t, kNumRegisters> regs{};
  AeStatus status = AeStatus::Running;
  int blocked_port = -1;  // -1 with SleepingOnGet: waiting on the host file
  std::vector<PortBuffer> ports;
  std::uint64_t running_cycles = 0;
  std::uint64_t sleep_cycles = 0;
  std::uint64_t halted_cycles = 0;
  // file_source: values fetched from the host so far and the element-local
  // buffer; file_sink: values not yet flushed and values flushed.
  std::uint64_t fetched = 0;
  std::deque<std::uint32_t> local;
  std::vector<std::uint32_t> pending_output;
  std::uint64_t written = 0;
  friend bool operator==(const AeState&, const AeState&) = default;
};

// Host-side bookkeeping of a probe's findings.
struct ProbeMonitor {
  std::uint64_t observations = 0;
  std::uint64_t drops = 0;
  std::uint64_t failures = 0;
  std::uint64_t tap_arrivals = 0;
  std::optional<std::uint64_t> first_failure;
  std::uint64_t window_start = 0;
  std::uint64_t window_transfers = 0;
  std::array<std::deque<std::uint32_t>, 2> ber_queue;
  std::uint64_t ber_pairs = 0;
  std::uint64_t ber_errors = 0;
  friend bool operator==(const ProbeMonitor&, const ProbeMonitor&) = default;
};

struct SystemState {
  std::shared_ptr<const Machine> machine;
  std::uint64_t cycle = 0;
  std::vector<AeState> aes;
  std::vector<ProbeMonitor> monitors;
  std::uint64_t quiet_cycles = 0;  // consecutive cycles with no activity

  const Machine& m() const { return *machine; }
};

// Fresh state at cycle 0. Truncates bound output files.
SystemState make_initial_state(std::shared_ptr<const Machine> machine);

// Adopts a machine that extends the state's one with extra probes (same
// design, same schedule for existing signals); existing AE state is kept.
void attach_machine(SystemState& state, std::shared_ptr<const Machine> machine);

// One cycle: compute phase, then bus phase. Events of the cycle go to `sink`
// in (kind, signal id, instance path) order.
void step(SystemState& state, TraceSink* sink = nullptr);

// Appends pending file_sink values to their bound files.
void flush_outputs(SystemState& state);

struct DeadlockReport {
  std::uint64_t detected_at = 0;
  std::uint64_t quiet_since = 0;
  struct Edge {
    std::string from;
    std::string to;
    std::string signal;
    friend bool operator==(const Edge&, const Edge&) = default;
  };
  std::vector<Edge> wait_for;
  std::vector<std::vector<std::string>> cycles;  // SCCs of the wait-for graph
  std::vector<std::string> starved;              // sleeping, not on a cycle
};

std::optional<DeadlockReport> detect_deadlock(const SystemState& state);

enum class HaltReason { MaxCycles, AllHalted, Breakpoint, Deadlock };
std::string_view to_string(HaltReason r);

struct Breakpoint {
  std::string instance;
  int pc = 0;
  friend auto operator<=>(const Breakpoint&, const Breakpoint&) = default;
};

struct RunOptions {
  std::set<Breakpoint> breakpoints;
  // Resuming from a breakpoint stop: do not stop again before the first step.
  bool resume = false;
};

struct RunResult {
  HaltReason reason = HaltReason::MaxCycles;
  std::uint64_t cycles_run = 0;
  std::optional<Breakpoint> breakpoint;
  std::optional<DeadlockReport> deadlock;
};

RunResult run(SystemState& state, std::uint64_t max_cycles, const RunOptions& options = {},
              TraceSink* sink = nullptr);

bool all_halted(const SystemState& state);

// Serializable dump of the whole state; restore() continues identically.
nlohmann::json snapshot(const SystemState& state);
SystemState restore(std::shared_ptr<const Machine> machine, const nlohmann::json& dump);

nlohmann::json to_json(const DeadlockReport& r);

// Number of cycles c in [start, start + length) with c mod period == offset.
std::uint64_t opportunities(std::uint64_t start, std::uint64_t length, int period, int offset);

}  // namespace pico
