#include "picosim/engine.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "picosim/fileio.hpp"
#include "picosim/graph.hpp"

namespace pico {

using nlohmann::json;

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Transfer:
      return "transfer";
    case EventKind::Put:
      return "put";
    case EventKind::Get:
      return "get";
    case EventKind::Sleep:
      return "sleep";
    case EventKind::Wake:
      return "wake";
    case EventKind::Halt:
      return "halt";
    case EventKind::AssertFail:
      return "assert_fail";
    case EventKind::OverwriteLoss:
      return "overwrite_loss";
  }
  return "?";
}

std::optional<EventKind> event_kind_from(std::string_view s) {
  for (int k = 0; k <= static_cast<int>(EventKind::OverwriteLoss); ++k) {
    if (to_string(static_cast<EventKind>(k)) == s) return static_cast<EventKind>(k);
  }
  return std::nullopt;
}

std::string_view to_string(AeStatus s) {
  switch (s) {
    case AeStatus::Running:
      return "running";
    case AeStatus::SleepingOnPut:
      return "sleeping_on_put";
    case AeStatus::SleepingOnGet:
      return "sleeping_on_get";
    case AeStatus::Halted:
      return "halted";
  }
  return "?";
}

std::string_view to_string(HaltReason r) {
  switch (r) {
    case HaltReason::MaxCycles:
      return "max_cycles";
    case HaltReason::AllHalted:
      return "all_halted";
    case HaltReason::Breakpoint:
      return "breakpoint";
    case HaltReason::Deadlock:
      return "deadlock";
  }
  return "?";
}

std::uint64_t opportunities(std::uint64_t start, std::uint64_t length, int period, int offset) {
  if (length == 0) return 0;
  const auto p = static_cast<std::uint64_t>(period);
  const auto o = static_cast<std::uint64_t>(offset);
  std::uint64_t first = start + (o + p - start % p) % p;
  std::uint64_t end = start + length;
  return first >= end ? 0 : 1 + (end - 1 - first) / p;
}

// ---------------------------------------------------------------------------
// Machine

int Machine::ae_index(std::string_view path) const {
  for (std::size_t i = 0; i < aes.size(); ++i) {
    if (aes[i].path == path) return static_cast<int>(i);
  }
  int found = -1;
  for (std::size_t i = 0; i < aes.size(); ++i) {
    std::string_view p = aes[i].path;
    if (p.size() > path.size() && p.ends_with(path) && p[p.size() - path.size() - 1] == '/') {
      if (found >= 0) return -1;
      found = static_cast<int>(i);
    }
  }
  return found;
}

int Machine::signal_index(std::string_view name) const { return artifact->design.find_signal(name); }

namespace {

std::vector<Op> resolve_program(const Program& prog, const std::vector<MachinePort>& ports,
                                const std::string& path) {
  std::vector<Op> code;
  for (const auto& ins : prog.code) {
    Op op;
    op.op = ins.op;
    op.rd = ins.regs[0];
    op.ra = ins.regs[1];
    op.rb = ins.regs[2];
    op.imm = ins.imm;
    switch (operand_shape(ins.op)) {
      case OperandShape::Label:
      case OperandShape::RegLabel: {
        auto t = prog.label_index(ins.target);
        if (!t) throw Error(path + ": undefined label " + ins.target);
        op.target = *t;
        break;
      }
      case OperandShape::RegPort: {
        for (std::size_t p = 0; p < ports.size(); ++p) {
          if (ports[p].name == ins.port) op.port = static_cast<int>(p);
        }
        if (op.port < 0) throw Error(path + ": unknown port " + ins.port);
        break;
      }
      default:
        break;
    }
    code.push_back(op);
  }
  return code;
}

}  // namespace

std::shared_ptr<const Machine> build_machine(std::shared_ptr<const CompiledArtifact> artifact) {
  auto m = std::make_shared<Machine>();
  const CompiledArtifact& a = *artifact;
  const FlatDesign& flat = a.design;
  m->artifact = artifact;
  m->frame_length = std::max(1, a.schedule.frame_length);

  for (const auto& inst : flat.instances) {
    MachineAe ae;
    ae.path = inst.path;
    ae.kind = inst.builtin == Builtin::FileSource ? AeKind::FileSource
              : inst.builtin == Builtin::FileSink ? AeKind::FileSink
                                                  : AeKind::Program;
    for (const auto& p : inst.ports) ae.ports.push_back({p.name, p.dir, -1, a.grid.buffer_depth});
    m->aes.push_back(std::move(ae));
  }
  m->design_aes = m->aes.size();

  m->signals.resize(flat.signals.size());
  for (std::size_t s = 0; s < flat.signals.size(); ++s) {
    const FlatSignal& fs = flat.signals[s];
    MachineSignal& ms = m->signals[s];
    ms.id = fs.id;
    ms.mode = fs.mode;
    ms.period = fs.period;
    const SlotAssignment* slot = a.schedule.find(fs.id);
    if (!slot) throw Error("signal " + fs.id + " is not scheduled");
    ms.offset = slot->offset;
    ms.src_ae = flat.instance_index(fs.source.instance);
    ms.src_port = flat.instances[ms.src_ae].port_index(fs.source.port);
    m->aes[ms.src_ae].ports[ms.src_port].signal = static_cast<int>(s);
    for (const auto& d : fs.dests) {
      MachineDest md;
      md.ae = flat.instance_index(d.instance);
      md.port = flat.instances[md.ae].port_index(d.port);
      m->aes[md.ae].ports[md.port].signal = static_cast<int>(s);
      ms.dests.push_back(md);
    }
  }

  for (std::size_t p = 0; p < a.probes.size(); ++p) {
    const ProbeInstance& probe = a.probes[p];
    MachineAe ae;
    ae.path = probe.path;
    ae.kind = AeKind::Probe;
    ae.probe = static_cast<int>(p);
    int ae_index = static_cast<int>(m->aes.size());
    for (std::size_t k = 0; k < probe.spec.signals.size(); ++k) {
      int s = flat.signal_index(probe.spec.signals[k]);
      if (s < 0) throw UnknownSignal("probe " + probe.path + " targets unknown signal " + probe.spec.signals[k]);
      ae.ports.push_back({"tap" + std::to_string(k), Direction::In, s, a.grid.probe_buffer_depth});
      m->signals[s].dests.push_back({ae_index, static_cast<int>(k), true});
    }
    ae.code = resolve_program(probe.program, ae.ports, probe.path);
    m->aes.push_back(std::move(ae));
  }

  for (std::size_t i = 0; i < m->design_aes; ++i) {
    const FlatInstance& inst = flat.instances[i];
    if (inst.builtin == Builtin::None) m->aes[i].code = resolve_program(inst.program, m->aes[i].ports, inst.path);
  }

  m->slot_signals.assign(m->frame_length, {});
  for (std::size_t s = 0; s < m->signals.size(); ++s) {
    const auto& ms = m->signals[s];
    for (int slot = ms.offset; slot < m->frame_length; slot += ms.period) {
      m->slot_signals[slot].push_back(static_cast<int>(s));
    }
  }

  std::vector<int> order(m->aes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int x, int y) { return m->aes[x].path < m->aes[y].path; });
  m->ae_rank.assign(m->aes.size(), 0);
  for (std::size_t r = 0; r < order.size(); ++r) m->ae_rank[order[r]] = static_cast<int>(r);

  m->inputs.assign(m->aes.size(), nullptr);
  m->input_paths.assign(m->aes.size(), {});
  m->output_paths.assign(m->aes.size(), {});
  for (const auto& b : a.bindings) {
    int s = flat.signal_index(b.signal);
    if (s < 0) throw UnknownSignal("binding targets unknown signal " + b.signal);
    const MachineSignal& ms = m->signals[s];
    if (b.dir == BindDirection::Input) {
      if (m->aes[ms.src_ae].kind != AeKind::FileSource) {
        throw BadSpec("signal " + b.signal + " is not driven by a file_source");
      }
      m->input_paths[ms.src_ae] = b.path;
      m->inputs[ms.src_ae] = std::make_shared<const std::vector<std::uint32_t>>(
          read_value_file(b.path, flat.signals[s].type));
    } else {
      bool found = false;
      for (const auto& d : ms.dests) {
        if (!d.tap && m->aes[d.ae].kind == AeKind::FileSink) {
          m->output_paths[d.ae] = b.path;
          found = true;
        }
      }
      if (!found) throw BadSpec("signal " + b.signal + " has no file_sink destination");
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Trace formatting

std::string format_event(const Machine& m, const TraceEvent& e) {
  std::string out;
  out.reserve(96);
  out += "{\"cycle\":";
  out += std::to_string(e.cycle);
  out += ",\"kind\":\"";
  out += to_string(e.kind);
  out += '"';
  if (e.signal >= 0) {
    out += ",\"signal\":\"";
    out += m.signals[e.signal].id;
    out += '"';
  }
  if (e.instance >= 0) {
    out += ",\"instance\":\"";
    out += m.aes[e.instance].path;
    out += '"';
  }
  if (e.has_value) {
    out += ",\"value\":";
    out += std::to_string(e.value);
  }
  out += '}';
  return out;
}

TraceEvent parse_event(const Machine& m, std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& ex) {
    throw FormatError(std::string("bad trace line: ") + ex.what());
  }
  TraceEvent e;
  e.cycle = j.at("cycle").get<std::uint64_t>();
  auto kind = event_kind_from(j.at("kind").get<std::string>());
  if (!kind) throw FormatError("bad trace event kind");
  e.kind = *kind;
  if (j.contains("signal")) {
    e.signal = m.artifact->design.signal_index(j["signal"].get<std::string>());
    if (e.signal < 0) throw UnknownSignal("trace names unknown signal " + j["signal"].get<std::string>());
  }
  if (j.contains("instance")) {
    e.instance = m.ae_index(j["instance"].get<std::string>());
    if (e.instance < 0) throw UnknownInstance("trace names unknown instance " + j["instance"].get<std::string>());
  }
  if (j.contains("value")) {
    e.has_value = true;
    e.value = j["value"].get<std::uint32_t>();
  }
  return e;
}

std::vector<TraceEvent> read_trace(const Machine& m, std::istream& in) {
  std::vector<TraceEvent> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(parse_event(m, line));
  }
  return out;
}

void JsonlSink::record(const Machine& m, std::span<const TraceEvent> events) {
  for (const auto& e : events) out_ << format_event(m, e) << '\n';
}

// ---------------------------------------------------------------------------
// State

namespace {

AeState fresh_ae(const MachineAe& ae) {
  AeState st;
  for (const auto& p : ae.ports) st.ports.push_back({p.capacity, {}});
  return st;
}

void truncate_output(const Machine& m, std::size_t ae) {
  const std::string& path = m.output_paths[ae];
  if (path.empty()) return;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
}

ProbeMonitor fresh_monitor(std::uint64_t cycle) {
  ProbeMonitor mon;
  mon.window_start = cycle;
  return mon;
}

}  // namespace

SystemState make_initial_state(std::shared_ptr<const Machine> machine) {
  SystemState st;
  st.machine = std::move(machine);
  for (const auto& ae : st.machine->aes) st.aes.push_back(fresh_ae(ae));
  st.monitors.assign(st.machine->artifact->probes.size(), fresh_monitor(0));
  for (std::size_t i = 0; i < st.machine->aes.size(); ++i) truncate_output(*st.machine, i);
  return st;
}

void attach_machine(SystemState& state, std::shared_ptr<const Machine> machine) {
  const Machine& old = *state.machine;
  if (machine->design_aes != old.design_aes || machine->aes.size() < old.aes.size()) {
    throw Error("machine is not an extension of the running one");
  }
  for (std::size_t i = 0; i < old.aes.size(); ++i) {
    if (machine->aes[i].path != old.aes[i].path) throw Error("machine is not an extension of the running one");
  }
  for (std::size_t i = old.aes.size(); i < machine->aes.size(); ++i) {
    state.aes.push_back(fresh_ae(machine->aes[i]));
  }
  while (state.monitors.size() < machine->artifact->probes.size()) {
    state.monitors.push_back(fresh_monitor(state.cycle));
  }
  for (std::size_t i = 0; i < machine->design_aes; ++i) {
    if (machine->output_paths[i] != old.output_paths[i]) {
      truncate_output(*machine, i);
      state.aes[i].written = 0;
    }
    if (machine->input_paths[i] != old.input_paths[i]) {
      state.aes[i].fetched = 0;
      state.aes[i].local.clear();
    }
  }
  state.machine = std::move(machine);
}

bool all_halted(const SystemState& state) {
  const Machine& m = state.m();
  for (std::size_t i = 0; i < m.design_aes; ++i) {
    if (state.aes[i].status != AeStatus::Halted) return false;
  }
  return true;
}

namespace {

inline constexpr std::size_t kRefillSize = 64;

std::uint32_t width_mask(int width) { return width >= 32 ? 0xffffffffu : ((1u << width) - 1u); }

class Stepper {
 public:
  Stepper(SystemState& s, std::vector<TraceEvent>& events)
      : st_(s), m_(*s.machine), a_(*m_.artifact), events_(events) {}

  void run() {
    const std::uint64_t cycle = st_.cycle;
    refill_sources();
    bool issued = false;
    for (std::size_t i = 0; i < m_.aes.size(); ++i) {
      AeState& ae = st_.aes[i];
      switch (ae.status) {
        case AeStatus::Halted:
          ++ae.halted_cycles;
          continue;
        case AeStatus::SleepingOnPut:
        case AeStatus::SleepingOnGet:
          ++ae.sleep_cycles;
          continue;
        case AeStatus::Running:
          ++ae.running_cycles;
          if (i < m_.design_aes) issued = true;
          break;
      }
      switch (m_.aes[i].kind) {
        case AeKind::Program:
        case AeKind::Probe:
          execute(static_cast<int>(i));
          break;
        case AeKind::FileSource:
          source_step(static_cast<int>(i));
          break;
        case AeKind::FileSink:
          sink_step(static_cast<int>(i));
          break;
      }
    }

    bool fired = false;
    for (int s : m_.slot_signals[cycle % static_cast<std::uint64_t>(m_.frame_length)]) {
      fired = fire(s) || fired;
    }
    wake_sleepers();
    close_bandwidth_windows();

    bool pending_input = false;
    for (std::size_t i = 0; i < m_.design_aes && !pending_input; ++i) {
      if (m_.aes[i].kind != AeKind::FileSource) continue;
      const auto& in = m_.inputs[i];
      pending_input = !st_.aes[i].local.empty() || (in && st_.aes[i].fetched < in->size());
    }
    st_.quiet_cycles = (issued || fired || pending_input) ? 0 : st_.quiet_cycles + 1;
    ++st_.cycle;
  }

 private:
  void emit(EventKind kind, int signal, int instance, std::optional<std::uint32_t> value = std::nullopt) {
    TraceEvent e;
    e.cycle = st_.cycle;
    e.kind = kind;
    e.signal = signal;
    e.instance = instance;
    if (value) {
      e.has_value = true;
      e.value = *value;
    }
    events_.push_back(e);
  }

  void refill_sources() {
    for (std::size_t i = 0; i < m_.design_aes; ++i) {
      if (m_.aes[i].kind != AeKind::FileSource) continue;
      AeState& ae = st_.aes[i];
      const auto& in = m_.inputs[i];
      if (!ae.local.empty() || !in) continue;
      std::size_t n = std::min<std::size_t>(kRefillSize, in->size() - ae.fetched);
      for (std::size_t k = 0; k < n; ++k) ae.local.push_back((*in)[ae.fetched + k]);
      ae.fetched += n;
    }
  }

  void sleep(int i, AeStatus status, int port) {
    AeState& ae = st_.aes[i];
    ae.status = status;
    ae.blocked_port = port;
    emit(EventKind::Sleep, port >= 0 ? m_.aes[i].ports[port].signal : -1, i);
  }

  void halt(int i) {
    st_.aes[i].status = AeStatus::Halted;
    emit(EventKind::Halt, -1, i);
  }

  void execute(int i) {
    AeState& ae = st_.aes[i];
    const MachineAe& mae = m_.aes[i];
    if (ae.pc < 0 || ae.pc >= static_cast<int>(mae.code.size())) {
      halt(i);
      return;
    }
    const Op& op = mae.code[ae.pc];
    auto& r = ae.regs;
    switch (op.op) {
      case Opcode::Const:
        r[op.rd] = op.imm;
        break;
      case Opcode::Mov:
        r[op.rd] = r[op.ra];
        break;
      case Opcode::Add:
        r[op.rd] = r[op.ra] + r[op.rb];
        break;
      case Opcode::Sub:
        r[op.rd] = r[op.ra] - r[op.rb];
        break;
      case Opcode::Mul:
        r[op.rd] = r[op.ra] * r[op.rb];
        break;
      case Opcode::And:
        r[op.rd] = r[op.ra] & r[op.rb];
        break;
      case Opcode::Or:
        r[op.rd] = r[op.ra] | r[op.rb];
        break;
      case Opcode::Xor:
        r[op.rd] = r[op.ra] ^ r[op.rb];
        break;
      case Opcode::Shl:
        r[op.rd] = r[op.ra] << (r[op.rb] & 31u);
        break;
      case Opcode::Shr:
        r[op.rd] = r[op.ra] >> (r[op.rb] & 31u);
        break;
      case Opcode::CmpEq:
        r[op.rd] = r[op.ra] == r[op.rb] ? 1u : 0u;
        break;
      case Opcode::CmpLt:
        r[op.rd] = r[op.ra] < r[op.rb] ? 1u : 0u;
        break;
      case Opcode::Br:
        ae.pc = op.target;
        return;
      case Opcode::Brz:
        if (r[op.rd] == 0) {
          ae.pc = op.target;
          return;
        }
        break;
      case Opcode::Put: {
        PortBuffer& buf = ae.ports[op.port];
        if (buf.full()) {
          sleep(i, AeStatus::SleepingOnPut, op.port);
          return;
        }
        buf.values.push_back(r[op.rd]);
        emit(EventKind::Put, mae.ports[op.port].signal, i, r[op.rd]);
        break;
      }
      case Opcode::Get: {
        PortBuffer& buf = ae.ports[op.port];
        if (buf.empty()) {
          sleep(i, AeStatus::SleepingOnGet, op.port);
          return;
        }
        std::uint32_t v = buf.values.front();
        buf.values.pop_front();
        r[op.rd] = v;
        emit(EventKind::Get, mae.ports[op.port].signal, i, v);
        if (mae.is_probe()) observe(i, op.port, v);
        break;
      }
      case Opcode::Nop:
        break;
      case Opcode::Halt:
        halt(i);
        return;
    }
    ++ae.pc;
  }

  void source_step(int i) {
    AeState& ae = st_.aes[i];
    if (ae.local.empty()) {
      sleep(i, AeStatus::SleepingOnGet, -1);
      return;
    }
    PortBuffer& buf = ae.ports[0];
    if (buf.full()) {
      sleep(i, AeStatus::SleepingOnPut, 0);
      return;
    }
    std::uint32_t v = ae.local.front();
    ae.local.pop_front();
    buf.values.push_back(v);
    emit(EventKind::Put, m_.aes[i].ports[0].signal, i, v);
  }

  void sink_step(int i) {
    AeState& ae = st_.aes[i];
    PortBuffer& buf = ae.ports[0];
    if (buf.empty()) {
      sleep(i, AeStatus::SleepingOnGet, 0);
      return;
    }
    std::uint32_t v = buf.values.front();
    buf.values.pop_front();
    if (!m_.output_paths[i].empty()) ae.pending_output.push_back(v);
    emit(EventKind::Get, m_.aes[i].ports[0].signal, i, v);
  }

  void observe(int i, int port, std::uint32_t v) {
    const MachineAe& mae = m_.aes[i];
    const ProbeInstance& probe = a_.probes[mae.probe];
    ProbeMonitor& mon = st_.monitors[mae.probe];
    ++mon.observations;
    switch (probe.spec.kind) {
      case ProbeKind::Trace:
      case ProbeKind::AssertBandwidth:
        break;
      case ProbeKind::AssertPredicate:
        if (!compare(probe.spec.cmp, v, probe.spec.constant)) {
          ++mon.failures;
          if (!mon.first_failure) mon.first_failure = st_.cycle;
          emit(EventKind::AssertFail, mae.ports[port].signal, i, v);
        }
        break;
      case ProbeKind::Ber: {
        mon.ber_queue[port].push_back(v);
        const int width = a_.design.signals[mae.ports[0].signal].type.width;
        while (!mon.ber_queue[0].empty() && !mon.ber_queue[1].empty()) {
          std::uint32_t diff = (mon.ber_queue[0].front() ^ mon.ber_queue[1].front()) & width_mask(width);
          mon.ber_queue[0].pop_front();
          mon.ber_queue[1].pop_front();
          ++mon.ber_pairs;
          mon.ber_errors += static_cast<std::uint64_t>(std::popcount(diff));
        }
        break;
      }
    }
  }

  bool fire(int s) {
    const MachineSignal& sig = m_.signals[s];
    PortBuffer& src = st_.aes[sig.src_ae].ports[sig.src_port];
    if (src.empty()) return false;
    if (sig.mode == SignalMode::Sync) {
      for (const auto& d : sig.dests) {
        if (!d.tap && st_.aes[d.ae].ports[d.port].full()) return false;
      }
    }
    std::uint32_t v = src.values.front();
    src.values.pop_front();
    emit(EventKind::Transfer, s, -1, v);
    for (const auto& d : sig.dests) {
      PortBuffer& buf = st_.aes[d.ae].ports[d.port];
      if (d.tap) {
        ProbeMonitor& mon = st_.monitors[m_.aes[d.ae].probe];
        ++mon.tap_arrivals;
        ++mon.window_transfers;
        if (buf.full()) {
          ++mon.drops;
          emit(EventKind::OverwriteLoss, s, d.ae, v);
        } else {
          buf.values.push_back(v);
        }
        continue;
      }
      if (buf.full()) {
        std::uint32_t lost = buf.values.back();
        buf.values.back() = v;
        emit(EventKind::OverwriteLoss, s, d.ae, lost);
      } else {
        buf.values.push_back(v);
      }
    }
    return true;
  }

  void wake_sleepers() {
    for (std::size_t i = 0; i < m_.aes.size(); ++i) {
      AeState& ae = st_.aes[i];
      bool wake = false;
      if (ae.status == AeStatus::SleepingOnPut) {
        wake = !ae.ports[ae.blocked_port].full();
      } else if (ae.status == AeStatus::SleepingOnGet && ae.blocked_port >= 0) {
        wake = !ae.ports[ae.blocked_port].empty();
      }
      if (!wake) continue;
      int signal = m_.aes[i].ports[ae.blocked_port].signal;
      ae.status = AeStatus::Running;
      ae.blocked_port = -1;
      emit(EventKind::Wake, signal, static_cast<int>(i));
    }
  }

  void close_bandwidth_windows() {
    for (std::size_t p = 0; p < a_.probes.size(); ++p) {
      const ProbeSpec& spec = a_.probes[p].spec;
      if (spec.kind != ProbeKind::AssertBandwidth) continue;
      ProbeMonitor& mon = st_.monitors[p];
      if (st_.cycle + 1 - mon.window_start < static_cast<std::uint64_t>(spec.window)) continue;
      int ae = static_cast<int>(m_.design_aes + p);
      int s = m_.aes[ae].ports[0].signal;
      const MachineSignal& sig = m_.signals[s];
      std::uint64_t offered = opportunities(mon.window_start, spec.window, sig.period, sig.offset);
      double util = offered ? static_cast<double>(mon.window_transfers) / static_cast<double>(offered) : 1.0;
      if (util < spec.floor) {
        ++mon.failures;
        if (!mon.first_failure) mon.first_failure = st_.cycle;
        emit(EventKind::AssertFail, s, ae, static_cast<std::uint32_t>(mon.window_transfers));
      }
      mon.window_start = st_.cycle + 1;
      mon.window_transfers = 0;
    }
  }

  SystemState& st_;
  const Machine& m_;
  const CompiledArtifact& a_;
  std::vector<TraceEvent>& events_;
};

}  // namespace

void step(SystemState& state, TraceSink* sink) {
  thread_local std::vector<TraceEvent> events;
  events.clear();
  Stepper(state, events).run();
  if (!sink || events.empty()) return;
  const Machine& m = state.m();
  auto rank = [&](const TraceEvent& e) {
    return std::make_tuple(static_cast<int>(e.kind), e.signal, e.instance >= 0 ? m.ae_rank[e.instance] : -1);
  };
  std::sort(events.begin(), events.end(), [&](const TraceEvent& x, const TraceEvent& y) { return rank(x) < rank(y); });
  sink->record(m, events);
}

void flush_outputs(SystemState& state) {
  const Machine& m = state.m();
  for (std::size_t i = 0; i < m.design_aes; ++i) {
    AeState& ae = state.aes[i];
    if (ae.pending_output.empty() || m.output_paths[i].empty()) continue;
    int s = m.aes[i].ports[0].signal;
    append_value_file(m.output_paths[i], ae.pending_output, m.artifact->design.signals[s].type);
    ae.written += ae.pending_output.size();
    ae.pending_output.clear();
  }
}

// ---------------------------------------------------------------------------
// Deadlock

std::optional<DeadlockReport> detect_deadlock(const SystemState& state) {
  const Machine& m = state.m();
  if (state.quiet_cycles < static_cast<std::uint64_t>(m.frame_length)) return std::nullopt;
  std::vector<int> live;
  for (std::size_t i = 0; i < m.design_aes; ++i) {
    if (state.aes[i].status == AeStatus::Running) return std::nullopt;
    if (state.aes[i].status != AeStatus::Halted) live.push_back(static_cast<int>(i));
  }
  if (live.empty()) return std::nullopt;

  DeadlockReport report;
  report.detected_at = state.cycle;
  report.quiet_since = state.cycle - state.quiet_cycles;
  Adjacency adj(m.design_aes);
  std::vector<bool> self_loop(m.design_aes, false);
  auto add_edge = [&](int from, int to, int signal) {
    if (to < 0 || static_cast<std::size_t>(to) >= m.design_aes) return;
    if (std::find(adj[from].begin(), adj[from].end(), to) == adj[from].end()) adj[from].push_back(to);
    if (from == to) self_loop[from] = true;
    report.wait_for.push_back({m.aes[from].path, m.aes[to].path, m.signals[signal].id});
  };
  for (int i : live) {
    const AeState& ae = state.aes[i];
    if (ae.blocked_port < 0) continue;  // waiting on the host file
    int s = m.aes[i].ports[ae.blocked_port].signal;
    const MachineSignal& sig = m.signals[s];
    if (ae.status == AeStatus::SleepingOnGet) {
      add_edge(i, sig.src_ae, s);
    } else {
      for (const auto& d : sig.dests) {
        if (!d.tap) add_edge(i, d.ae, s);
      }
    }
  }
  std::vector<bool> on_cycle(m.design_aes, false);
  auto comps = strongly_connected_components(adj);
  std::sort(comps.begin(), comps.end(), [&](const auto& x, const auto& y) {
    return m.aes[x.front()].path < m.aes[y.front()].path;
  });
  for (const auto& c : comps) {
    if (c.size() < 2 && !self_loop[c.front()]) continue;
    std::vector<std::string> names;
    for (int v : c) {
      names.push_back(m.aes[v].path);
      on_cycle[v] = true;
    }
    std::sort(names.begin(), names.end());
    report.cycles.push_back(std::move(names));
  }
  for (int i : live) {
    if (!on_cycle[i]) report.starved.push_back(m.aes[i].path);
  }
  std::sort(report.starved.begin(), report.starved.end());
  return report;
}

json to_json(const DeadlockReport& r) {
  json edges = json::array();
  for (const auto& e : r.wait_for) edges.push_back({{"from", e.from}, {"to", e.to}, {"signal", e.signal}});
  return {{"detected_at", r.detected_at},
          {"quiet_since", r.quiet_since},
          {"wait_for", edges},
          {"cycles", r.cycles},
          {"starved", r.starved}};
}

// ---------------------------------------------------------------------------
// Run

RunResult run(SystemState& state, std::uint64_t max_cycles, const RunOptions& options, TraceSink* sink) {
  const Machine& m = state.m();
  std::vector<std::pair<int, int>> bps;
  for (const auto& bp : options.breakpoints) {
    int i = m.ae_index(bp.instance);
    if (i < 0) throw UnknownInstance("breakpoint on unknown instance " + bp.instance);
    bps.emplace_back(i, bp.pc);
  }
  RunResult result;
  bool first = true;
  for (;;) {
    if (all_halted(state)) {
      result.reason = HaltReason::AllHalted;
      break;
    }
    if (state.quiet_cycles >= static_cast<std::uint64_t>(m.frame_length)) {
      auto report = detect_deadlock(state);
      if (report && !report->cycles.empty()) {
        result.reason = HaltReason::Deadlock;
        result.deadlock = std::move(report);
        break;
      }
    }
    if (!(first && options.resume)) {
      for (auto [ae, pc] : bps) {
        if (state.aes[ae].status == AeStatus::Running && state.aes[ae].pc == pc) {
          result.reason = HaltReason::Breakpoint;
          result.breakpoint = Breakpoint{m.aes[ae].path, pc};
          break;
        }
      }
      if (result.breakpoint) break;
    }
    if (result.cycles_run == max_cycles) {
      result.reason = HaltReason::MaxCycles;
      break;
    }
    step(state, sink);
    ++result.cycles_run;
    first = false;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Snapshot

namespace {

std::optional<AeStatus> status_from(const std::string& s) {
  for (auto st : {AeStatus::Running, AeStatus::SleepingOnPut, AeStatus::SleepingOnGet, AeStatus::Halted}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

template <typename Container>
json values_json(const Container& c) {
  json arr = json::array();
  for (auto v : c) arr.push_back(v);
  return arr;
}

}  // namespace

json snapshot(const SystemState& state) {
  const Machine& m = state.m();
  json aes = json::array();
  for (std::size_t i = 0; i < m.aes.size(); ++i) {
    const AeState& ae = state.aes[i];
    json buffers = json::object();
    for (std::size_t p = 0; p < ae.ports.size(); ++p) buffers[m.aes[i].ports[p].name] = values_json(ae.ports[p].values);
    json j = {{"path", m.aes[i].path},
              {"status", to_string(ae.status)},
              {"blocked_port", ae.blocked_port >= 0 ? json(m.aes[i].ports[ae.blocked_port].name) : json(nullptr)},
              {"pc", ae.pc},
              {"registers", values_json(ae.regs)},
              {"buffers", buffers},
              {"running_cycles", ae.running_cycles},
              {"sleep_cycles", ae.sleep_cycles},
              {"halted_cycles", ae.halted_cycles}};
    if (m.aes[i].kind == AeKind::FileSource) {
      j["file"] = {{"fetched", ae.fetched}, {"local", values_json(ae.local)}};
    } else if (m.aes[i].kind == AeKind::FileSink) {
      j["file"] = {{"written", ae.written}, {"pending", values_json(ae.pending_output)}};
    }
    aes.push_back(std::move(j));
  }
  json monitors = json::array();
  for (std::size_t p = 0; p < state.monitors.size(); ++p) {
    const ProbeMonitor& mon = state.monitors[p];
    monitors.push_back({{"probe", m.artifact->probes[p].path},
                        {"observations", mon.observations},
                        {"drops", mon.drops},
                        {"failures", mon.failures},
                        {"tap_arrivals", mon.tap_arrivals},
                        {"first_failure", mon.first_failure ? json(*mon.first_failure) : json(nullptr)},
                        {"window_start", mon.window_start},
                        {"window_transfers", mon.window_transfers},
                        {"ber_queue", {values_json(mon.ber_queue[0]), values_json(mon.ber_queue[1])}},
                        {"ber_pairs", mon.ber_pairs},
                        {"ber_errors", mon.ber_errors}});
  }
  return {{"cycle", state.cycle}, {"quiet_cycles", state.quiet_cycles}, {"elements", aes}, {"monitors", monitors}};
}

SystemState restore(std::shared_ptr<const Machine> machine, const json& dump) {
  SystemState st;
  st.machine = std::move(machine);
  const Machine& m = *st.machine;
  try {
    st.cycle = dump.at("cycle").get<std::uint64_t>();
    st.quiet_cycles = dump.at("quiet_cycles").get<std::uint64_t>();
    const json& aes = dump.at("elements");
    if (aes.size() != m.aes.size()) throw FormatError("dump has " + std::to_string(aes.size()) + " elements, design has " + std::to_string(m.aes.size()));
    for (std::size_t i = 0; i < m.aes.size(); ++i) {
      const json& j = aes[i];
      if (j.at("path").get<std::string>() != m.aes[i].path) throw FormatError("dump element order mismatch at " + m.aes[i].path);
      AeState ae = fresh_ae(m.aes[i]);
      auto status = status_from(j.at("status").get<std::string>());
      if (!status) throw FormatError("bad status in dump");
      ae.status = *status;
      if (!j.at("blocked_port").is_null()) {
        std::string port = j.at("blocked_port").get<std::string>();
        for (std::size_t p = 0; p < m.aes[i].ports.size(); ++p) {
          if (m.aes[i].ports[p].name == port) ae.blocked_port = static_cast<int>(p);
        }
        if (ae.blocked_port < 0) throw FormatError("bad blocked port in dump");
      }
      ae.pc = j.at("pc").get<int>();
      const json& regs = j.at("registers");
      for (int r = 0; r < kNumRegisters; ++r) ae.regs[r] = regs.at(r).get<std::uint32_t>();
      for (std::size_t p = 0; p < m.aes[i].ports.size(); ++p) {
        for (const auto& v : j.at("buffers").at(m.aes[i].ports[p].name)) ae.ports[p].values.push_back(v.get<std::uint32_t>());
      }
      ae.running_cycles = j.at("running_cycles").get<std::uint64_t>();
      ae.sleep_cycles = j.at("sleep_cycles").get<std::uint64_t>();
      ae.halted_cycles = j.at("halted_cycles").get<std::uint64_t>();
      if (m.aes[i].kind == AeKind::FileSource) {
        ae.fetched = j.at("file").at("fetched").get<std::uint64_t>();
        for (const auto& v : j.at("file").at("local")) ae.local.push_back(v.get<std::uint32_t>());
      } else if (m.aes[i].kind == AeKind::FileSink) {
        ae.written = j.at("file").at("written").get<std::uint64_t>();
        for (const auto& v : j.at("file").at("pending")) ae.pending_output.push_back(v.get<std::uint32_t>());
      }
      st.aes.push_back(std::move(ae));
    }
    const json& mons = dump.at("monitors");
    if (mons.size() != m.artifact->probes.size()) throw FormatError("dump probe count mismatch");
    for (const auto& j : mons) {
      ProbeMonitor mon;
      mon.observations = j.at("observations").get<std::uint64_t>();
      mon.drops = j.at("drops").get<std::uint64_t>();
      mon.failures = j.at("failures").get<std::uint64_t>();
      mon.tap_arrivals = j.at("tap_arrivals").get<std::uint64_t>();
      if (!j.at("first_failure").is_null()) mon.first_failure = j.at("first_failure").get<std::uint64_t>();
      mon.window_start = j.at("window_start").get<std::uint64_t>();
      mon.window_transfers = j.at("window_transfers").get<std::uint64_t>();
      for (int q = 0; q < 2; ++q) {
        for (const auto& v : j.at("ber_queue").at(q)) mon.ber_queue[q].push_back(v.get<std::uint32_t>());
      }
      mon.ber_pairs = j.at("ber_pairs").get<std::uint64_t>();
      mon.ber_errors = j.at("ber_errors").get<std::uint64_t>();
      st.monitors.push_back(std::move(mon));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad state dump: ") + e.what());
  }
  return st;
}

}  // namespace pico
