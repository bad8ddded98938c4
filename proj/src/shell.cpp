#include "picosim/shell.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>

#include "picosim/fileio.hpp"

namespace pico {

using nlohmann::json;

namespace {

struct VerbInfo {
  std::string_view name;
  std::vector<std::string_view> fields;  // named argument order
  std::string_view usage;
};

const std::vector<VerbInfo>& verbs() {
  static const std::vector<VerbInfo> table = {
      {"load", {"path"}, "load [path]"},
      {"run", {"n"}, "run N"},
      {"step", {"n"}, "step [N]"},
      {"break", {"action", "instance", "pc"}, "break add|remove <instance> <pc> | break list"},
      {"status", {}, "status"},
      {"inspect", {"instance"}, "inspect <instance>"},
      {"probe", {"action", "spec"}, "probe add <spec> | probe list | probe report"},
      {"bind", {"spec"}, "bind in|out=<path>:<signal>"},
      {"trace", {"mode", "path"}, "trace on <path> | trace off"},
      {"scc", {}, "scc"},
      {"util", {"signal", "from", "to"}, "util <signal> [from to]"},
      {"deadlock", {}, "deadlock"},
      {"hierarchy", {"scope"}, "hierarchy [scope]"},
      {"flat", {"scope"}, "flat [scope]"},
      {"snapshot", {"path"}, "snapshot [path]"},
      {"journal", {"path"}, "journal <path>"},
      {"subscribe", {"topic"}, "subscribe [trace]"},
      {"help", {}, "help"},
      {"quit", {}, "quit"},
  };
  return table;
}

const VerbInfo* find_verb(std::string_view verb) {
  for (const auto& v : verbs()) {
    if (v.name == verb) return &v;
  }
  return nullptr;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string json_arg(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) return v.dump();
  throw ProtocolError("argument values must be strings or numbers");
}

bool needs_quotes(const std::string& s) {
  if (s.empty()) return true;
  return std::any_of(s.begin(), s.end(), [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '"' || c == '\\' || c == '#' || c == ';' ||
           c == '{' || c == '}';
  });
}

std::uint64_t count_arg(const std::string& s, std::string_view what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw BadSpec(std::string(what) + " must be a non-negative integer, not '" + s + "'");
  return v;
}

}  // namespace

Command parse_command_text(std::string_view line) {
  Command c;
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < line.size()) {
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    std::string word;
    if (line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < line.size()) {
        char ch = line[i++];
        if (ch == '\\' && i < line.size()) {
          word += line[i++];
        } else if (ch == '"') {
          closed = true;
          break;
        } else {
          word += ch;
        }
      }
      if (!closed) throw BadSpec("unterminated quoted argument");
    } else {
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) word += line[i++];
    }
    words.push_back(std::move(word));
  }
  if (words.empty()) throw BadSpec("empty command");
  c.verb = lower(words.front());
  c.args.assign(words.begin() + 1, words.end());
  return c;
}

Command parse_command_json(const json& j) {
  if (!j.is_object()) throw ProtocolError("request must be a JSON object");
  Command c;
  if (j.contains("id")) c.id = j["id"];
  if (!j.contains("verb") || !j["verb"].is_string()) throw ProtocolError("request needs a string 'verb'");
  c.verb = lower(j["verb"].get<std::string>());
  json named = json::object();
  for (const auto& [key, value] : j.items()) {
    if (key == "id" || key == "verb") continue;
    if (key == "args") {
      if (value.is_array()) {
        for (const auto& v : value) c.args.push_back(json_arg(v));
      } else if (value.is_object()) {
        for (const auto& [k, v] : value.items()) named[k] = v;
      } else if (!value.is_null()) {
        c.args.push_back(json_arg(value));
      }
      continue;
    }
    named[key] = value;
  }
  if (named.empty()) return c;
  if (!c.args.empty()) throw ProtocolError("mix of positional and named arguments");
  const VerbInfo* info = find_verb(c.verb);
  if (!info) throw UnknownVerb("unknown verb '" + c.verb + "'");
  if (c.verb == "bind" && !named.contains("spec") && named.contains("signal")) {
    std::string dir = named.contains("dir") ? json_arg(named["dir"]) : "in";
    std::string path = named.contains("path") ? json_arg(named["path"]) : "";
    named = {{"spec", dir + "=" + path + ":" + json_arg(named["signal"])}};
  }
  std::size_t used = 0;
  for (auto field : info->fields) {
    auto it = named.find(std::string(field));
    if (it == named.end()) break;
    c.args.push_back(json_arg(*it));
    ++used;
  }
  if (used != named.size()) throw ProtocolError("unexpected or out-of-order arguments for '" + c.verb + "'");
  return c;
}

std::string command_text(const Command& c) {
  std::string out = c.verb;
  for (const auto& a : c.args) {
    out += ' ';
    if (!needs_quotes(a)) {
      out += a;
      continue;
    }
    out += '"';
    for (char ch : a) {
      if (ch == '"' || ch == '\\') out += '\\';
      out += ch;
    }
    out += '"';
  }
  return out;
}

bool is_known_verb(std::string_view verb) { return find_verb(verb) != nullptr; }

bool is_state_changing(const Command& c) {
  if (c.verb == "load" || c.verb == "run" || c.verb == "step" || c.verb == "bind" || c.verb == "trace") return true;
  if (c.verb == "break") return !c.args.empty() && (c.args[0] == "add" || c.args[0] == "remove");
  if (c.verb == "probe") return !c.args.empty() && c.args[0] == "add";
  return false;
}

json CommandResult::to_json(const json& id) const {
  json j = {{"id", id}, {"ok", ok}};
  if (ok) {
    j["data"] = data;
  } else {
    j["error"] = {{"type", error_type}, {"message", error}};
  }
  return j;
}

std::string error_type_name(const std::exception& e) {
#define PICO_ERROR_NAME(T) \
  if (dynamic_cast<const T*>(&e)) return #T
  PICO_ERROR_NAME(ScriptError);
  PICO_ERROR_NAME(ParseError);
  PICO_ERROR_NAME(TypeCheckError);
  PICO_ERROR_NAME(ElaborationError);
  PICO_ERROR_NAME(CapacityError);
  PICO_ERROR_NAME(SchedulingConflict);
  PICO_ERROR_NAME(NoReserveError);
  PICO_ERROR_NAME(TapRouteError);
  PICO_ERROR_NAME(FileFormatError);
  PICO_ERROR_NAME(MissingFile);
  PICO_ERROR_NAME(UnknownScope);
  PICO_ERROR_NAME(UnknownSignal);
  PICO_ERROR_NAME(UnknownInstance);
  PICO_ERROR_NAME(TypeMismatch);
  PICO_ERROR_NAME(BadSpec);
  PICO_ERROR_NAME(FormatError);
  PICO_ERROR_NAME(EngineHalted);
  PICO_ERROR_NAME(NotLoaded);
  PICO_ERROR_NAME(UnknownVerb);
  PICO_ERROR_NAME(ProtocolError);
  PICO_ERROR_NAME(Error);
#undef PICO_ERROR_NAME
  return "InternalError";
}

// ---------------------------------------------------------------------------
// Session

namespace {

// Feeds the session's transfer log, the trace file and event subscribers.
class SessionSink : public TraceSink {
 public:
  SessionSink(std::vector<TraceEvent>& transfers, std::ostream* file, const Session::EventCallback* forward)
      : transfers_(transfers), file_(file), forward_(forward) {}

  void record(const Machine& m, std::span<const TraceEvent> events) override {
    for (const auto& e : events) {
      if (e.kind == EventKind::Transfer) transfers_.push_back(e);
      if (!file_ && !forward_) continue;
      std::string line = format_event(m, e);
      if (file_) *file_ << line << '\n';
      if (forward_) (*forward_)(json{{"event", "trace"}, {"data", json::parse(line)}});
    }
  }

 private:
  std::vector<TraceEvent>& transfers_;
  std::ostream* file_;
  const Session::EventCallback* forward_;
};

}  // namespace

Session::Session(const std::string& path) {
  load(path);
  journal_.push_back(command_text({nullptr, "load", {path}}));
}

Session::~Session() = default;

const SystemState& Session::state() const {
  require_loaded();
  return *state_;
}

const CompiledArtifact& Session::artifact() const {
  require_loaded();
  return *artifact_;
}

void Session::require_loaded() const {
  if (!state_) throw NotLoaded("no artifact loaded; use 'load <path>'");
}

void Session::load(const std::string& path) {
  auto artifact = std::make_shared<const CompiledArtifact>(load_artifact(path));
  build_machine(artifact);
  base_ = std::move(artifact);
  path_ = path;
  reset();
}

void Session::reset() {
  auto machine = build_machine(base_);
  state_.emplace(make_initial_state(machine));
  artifact_ = base_;
  breakpoints_.clear();
  resume_ = false;
  transfers_.clear();
  trace_file_.reset();
  trace_path_.clear();
}

void Session::adopt(CompiledArtifact next) {
  auto artifact = std::make_shared<const CompiledArtifact>(std::move(next));
  auto machine = build_machine(artifact);
  attach_machine(*state_, machine);
  artifact_ = std::move(artifact);
}

void Session::emit(const std::string& event, json data) {
  if (on_event_) on_event_(json{{"event", event}, {"data", std::move(data)}});
}

json Session::advance(std::uint64_t n, bool honour_breakpoints) {
  if (all_halted(*state_)) throw EngineHalted("every element has halted; use 'load' to reset");
  SessionSink sink(transfers_, trace_file_.get(), forward_trace_ && on_event_ ? &on_event_ : nullptr);
  json out;
  if (honour_breakpoints) {
    RunOptions opts;
    opts.breakpoints = breakpoints_;
    opts.resume = resume_;
    RunResult r = run(*state_, n, opts, &sink);
    resume_ = r.reason == HaltReason::Breakpoint;
    out = {{"reason", to_string(r.reason)}, {"cycles_run", r.cycles_run}};
    if (r.breakpoint) out["breakpoint"] = {{"instance", r.breakpoint->instance}, {"pc", r.breakpoint->pc}};
    if (r.deadlock) out["deadlock"] = to_json(*r.deadlock);
  } else {
    std::uint64_t done = 0;
    while (done < n && !all_halted(*state_)) {
      step(*state_, &sink);
      ++done;
    }
    resume_ = false;
    out = {{"reason", done == n ? "max_cycles" : "all_halted"}, {"cycles_run", done}};
  }
  flush_outputs(*state_);
  if (trace_file_) trace_file_->flush();
  out["cycle"] = state_->cycle;
  emit("status", status_json());
  if (!artifact_->probes.empty()) emit("probes", probe_report(*state_));
  return out;
}

json Session::status_json() const {
  return {{"cycle", state_->cycle},
          {"all_halted", all_halted(*state_)},
          {"quiet_cycles", state_->quiet_cycles},
          {"instances", to_json(live_status(*state_))}};
}

json Session::inspect_json(const std::string& instance) const {
  const Machine& m = state_->m();
  int i = m.ae_index(instance);
  if (i < 0) throw UnknownInstance("unknown instance '" + instance + "'");
  json dump = snapshot(*state_);
  json j = dump["elements"][i];
  const MachineAe& ae = m.aes[i];
  const Program* prog = nullptr;
  switch (ae.kind) {
    case AeKind::Program:
      j["kind"] = "program";
      prog = &m.artifact->design.instances[i].program;
      break;
    case AeKind::FileSource:
      j["kind"] = "file_source";
      break;
    case AeKind::FileSink:
      j["kind"] = "file_sink";
      break;
    case AeKind::Probe:
      j["kind"] = "probe";
      prog = &m.artifact->probes[ae.probe].program;
      break;
  }
  int pc = state_->aes[i].pc;
  if (prog && pc >= 0 && pc < static_cast<int>(prog->code.size())) {
    j["next"] = format_instruction(prog->code[pc]);
  }
  json ports = json::array();
  for (const auto& p : ae.ports) {
    ports.push_back({{"name", p.name},
                     {"dir", to_string(p.dir)},
                     {"signal", p.signal >= 0 ? json(m.signals[p.signal].id) : json(nullptr)},
                     {"capacity", p.capacity}});
  }
  j["ports"] = ports;
  return j;
}

CommandResult Session::execute(const Command& cmd) {
  CommandResult r;
  try {
    r.data = dispatch(cmd);
    if (is_state_changing(cmd)) {
      Command plain = cmd;
      plain.id = nullptr;
      journal_.push_back(command_text(plain));
    }
  } catch (const std::exception& e) {
    r.ok = false;
    r.error_type = error_type_name(e);
    r.error = e.what();
  }
  return r;
}

json Session::dispatch(const Command& cmd) {
  const VerbInfo* info = find_verb(cmd.verb);
  if (!info) throw UnknownVerb("unknown verb '" + cmd.verb + "'");
  const auto& a = cmd.args;
  auto arity = [&](std::size_t lo, std::size_t hi) {
    if (a.size() < lo || a.size() > hi) throw BadSpec("usage: " + std::string(info->usage));
  };
  const std::string& v = cmd.verb;

  if (v == "help") {
    arity(0, 0);
    json out = json::array();
    for (const auto& verb : verbs()) out.push_back(verb.usage);
    return out;
  }
  if (v == "quit") {
    arity(0, 0);
    quit_ = true;
    return nullptr;
  }
  if (v == "load") {
    arity(0, 1);
    if (a.empty()) {
      if (!base_) throw NotLoaded("no artifact to reload; use 'load <path>'");
      reset();
    } else {
      load(a[0]);
    }
    return {{"path", path_}, {"design", artifact_->design.name}, {"cycle", state_->cycle}};
  }
  if (v == "subscribe") throw ProtocolError("subscribe is only available over the serve protocol");

  require_loaded();
  if (v == "run") {
    arity(1, 1);
    return advance(count_arg(a[0], "cycle count"), true);
  }
  if (v == "step") {
    arity(0, 1);
    return advance(a.empty() ? 1 : count_arg(a[0], "cycle count"), false);
  }
  if (v == "break") {
    arity(1, 3);
    if (a[0] == "list") {
      arity(1, 1);
    } else if (a[0] == "add" || a[0] == "remove") {
      arity(3, 3);
      int ae = state_->m().ae_index(a[1]);
      if (ae < 0) throw UnknownInstance("unknown instance '" + a[1] + "'");
      Breakpoint bp{state_->m().aes[ae].path, static_cast<int>(count_arg(a[2], "pc"))};
      if (a[0] == "add") {
        breakpoints_.insert(bp);
      } else if (!breakpoints_.erase(bp)) {
        throw BadSpec("no breakpoint at " + a[1] + " pc " + a[2]);
      }
    } else {
      throw BadSpec("usage: " + std::string(info->usage));
    }
    json out = json::array();
    for (const auto& bp : breakpoints_) out.push_back({{"instance", bp.instance}, {"pc", bp.pc}});
    return out;
  }
  if (v == "status") {
    arity(0, 0);
    return status_json();
  }
  if (v == "inspect") {
    arity(1, 1);
    return inspect_json(a[0]);
  }
  if (v == "probe") {
    if (a.empty()) throw BadSpec("usage: " + std::string(info->usage));
    if (a[0] == "add") {
      if (a.size() < 2) throw BadSpec("usage: " + std::string(info->usage));
      std::string spec;
      for (std::size_t k = 1; k < a.size(); ++k) spec += (k > 1 ? " " : "") + a[k];
      adopt(insert_probe(*artifact_, parse_probe_spec(spec)));
      const ProbeInstance& p = artifact_->probes.back();
      return {{"probe", p.path}, {"spec", p.spec.text()}, {"at", {p.at.row, p.at.col}}};
    }
    arity(1, 1);
    if (a[0] == "report") return probe_report(*state_);
    if (a[0] == "list") {
      json out = json::array();
      for (const auto& p : artifact_->probes) {
        out.push_back({{"probe", p.path}, {"spec", p.spec.text()}, {"at", {p.at.row, p.at.col}}});
      }
      return out;
    }
    throw BadSpec("usage: " + std::string(info->usage));
  }
  if (v == "bind") {
    arity(1, 1);
    FileBinding b = parse_binding(a[0]);
    adopt(bind_file(*artifact_, b));
    const FileBinding& bound = artifact_->bindings.back();
    return {{"dir", bound.dir == BindDirection::Input ? "in" : "out"}, {"path", bound.path}, {"signal", bound.signal}};
  }
  if (v == "trace") {
    arity(1, 2);
    if (a[0] == "on") {
      arity(2, 2);
      auto file = std::make_unique<std::ofstream>(a[1], std::ios::trunc);
      if (!*file) throw Error("cannot write " + a[1]);
      trace_file_ = std::move(file);
      trace_path_ = a[1];
      return {{"trace", trace_path_}};
    }
    if (a[0] == "off") {
      arity(1, 1);
      trace_file_.reset();
      trace_path_.clear();
      return {{"trace", nullptr}};
    }
    throw BadSpec("usage: " + std::string(info->usage));
  }
  if (v == "scc") {
    arity(0, 0);
    return to_json(scc(design_graph(artifact_->design)));
  }
  if (v == "util") {
    if (a.size() != 1 && a.size() != 3) throw BadSpec("usage: " + std::string(info->usage));
    std::uint64_t from = a.size() == 3 ? count_arg(a[1], "from") : 0;
    std::uint64_t to = a.size() == 3 ? count_arg(a[2], "to") : state_->cycle;
    const Machine& m = state_->m();
    double u = signal_utilization(transfers_, m, a[0], from, to);
    return {{"signal", m.signals[m.signal_index(a[0])].id}, {"from", from}, {"to", to}, {"utilization", u}};
  }
  if (v == "deadlock") {
    arity(0, 0);
    auto report = detect_deadlock(*state_);
    return report ? to_json(*report) : json(nullptr);
  }
  if (v == "hierarchy") {
    arity(0, 1);
    json out = json::array();
    for (const auto& e : hierarchy_view(artifact_->design, a.empty() ? kRootPath : std::string_view(a[0]))) {
      out.push_back({{"path", e.path},
                     {"name", e.name},
                     {"decl", e.decl},
                     {"kind", e.composite ? "composite" : "leaf"},
                     {"children", e.child_count}});
    }
    return out;
  }
  if (v == "flat") {
    arity(0, 1);
    return to_json(flat_view(artifact_->design, a.empty() ? kRootPath : std::string_view(a[0])));
  }
  if (v == "snapshot") {
    arity(0, 1);
    json dump = snapshot(*state_);
    if (a.empty()) return dump;
    std::ofstream out(a[0], std::ios::trunc);
    if (!out) throw Error("cannot write " + a[0]);
    out << dump.dump(2) << '\n';
    return {{"path", a[0]}, {"cycle", state_->cycle}};
  }
  if (v == "journal") {
    arity(1, 1);
    std::ofstream out(a[0], std::ios::trunc);
    if (!out) throw Error("cannot write " + a[0]);
    for (const auto& line : journal_) out << line << '\n';
    return {{"path", a[0]}, {"entries", journal_.size()}};
  }
  throw UnknownVerb("unknown verb '" + v + "'");
}

// ---------------------------------------------------------------------------
// Scripts

ScriptError::ScriptError(int line, const std::string& msg, std::vector<TranscriptEntry> transcript)
    : Error("line " + std::to_string(line) + ": " + msg), line_(line), transcript_(std::move(transcript)) {}

namespace {

struct ScriptNode {
  int line = 0;
  bool tolerant = false;
  std::string command;  // empty for repeat blocks
  std::uint64_t repeat = 0;
  std::vector<ScriptNode> body;
};

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted && (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) {
      return std::string(line.substr(0, i));
    }
  }
  return std::string(line);
}

ScriptNode command_node(int line, std::string text) {
  ScriptNode n;
  n.line = line;
  if (text.rfind("try ", 0) == 0 || text.rfind("try\t", 0) == 0) {
    n.tolerant = true;
    text = trim(text.substr(4));
  }
  Command c;
  try {
    c = parse_command_text(text);
  } catch (const Error& e) {
    throw ScriptError(line, e.what());
  }
  if (!is_known_verb(c.verb)) throw ScriptError(line, "unknown verb '" + c.verb + "'");
  n.command = std::move(text);
  return n;
}

// Matches "repeat N {" and returns N and the text after the brace.
std::optional<std::pair<std::uint64_t, std::string>> repeat_header(const std::string& text, int line) {
  if (text.rfind("repeat", 0) != 0 || (text.size() > 6 && !std::isspace(static_cast<unsigned char>(text[6])))) {
    return std::nullopt;
  }
  std::string rest = trim(text.substr(6));
  std::size_t brace = rest.find('{');
  if (brace == std::string::npos) throw ScriptError(line, "repeat needs a '{' block");
  std::string count = trim(rest.substr(0, brace));
  std::uint64_t n = 0;
  auto [p, ec] = std::from_chars(count.data(), count.data() + count.size(), n);
  if (ec != std::errc() || p != count.data() + count.size()) throw ScriptError(line, "repeat count must be a non-negative integer");
  return std::make_pair(n, trim(rest.substr(brace + 1)));
}

std::vector<ScriptNode> parse_script(std::string_view script) {
  std::vector<ScriptNode> root;
  std::vector<ScriptNode> open;  // unclosed repeat blocks
  auto add = [&](ScriptNode n) { (open.empty() ? root : open.back().body).push_back(std::move(n)); };
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= script.size()) {
    std::size_t nl = script.find('\n', pos);
    std::string_view raw = script.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? script.size() + 1 : nl + 1;
    ++line_no;
    std::string text = trim(strip_comment(raw));
    if (text.empty()) continue;
    if (text == "}") {
      if (open.empty()) throw ScriptError(line_no, "unmatched '}'");
      ScriptNode block = std::move(open.back());
      open.pop_back();
      add(std::move(block));
      continue;
    }
    if (auto header = repeat_header(text, line_no)) {
      ScriptNode block;
      block.line = line_no;
      block.repeat = header->first;
      std::string rest = header->second;
      if (rest.empty()) {
        open.push_back(std::move(block));
        continue;
      }
      if (rest.back() != '}') throw ScriptError(line_no, "inline repeat block must end with '}'");
      rest.pop_back();
      std::size_t start = 0;
      while (start <= rest.size()) {
        std::size_t semi = rest.find(';', start);
        std::string part = trim(rest.substr(start, semi == std::string::npos ? std::string::npos : semi - start));
        if (!part.empty()) block.body.push_back(command_node(line_no, part));
        if (semi == std::string::npos) break;
        start = semi + 1;
      }
      add(std::move(block));
      continue;
    }
    add(command_node(line_no, text));
  }
  if (!open.empty()) throw ScriptError(open.back().line, "repeat block is never closed");
  return root;
}

void execute_nodes(Session& session, const std::vector<ScriptNode>& nodes, std::vector<TranscriptEntry>& transcript) {
  for (const auto& n : nodes) {
    if (session.quit_requested()) return;
    if (n.command.empty()) {
      for (std::uint64_t k = 0; k < n.repeat && !session.quit_requested(); ++k) execute_nodes(session, n.body, transcript);
      continue;
    }
    CommandResult r = session.execute_line(n.command);
    transcript.push_back({n.line, n.command, r});
    if (!r.ok && !n.tolerant) throw ScriptError(n.line, r.error_type + ": " + r.error, transcript);
  }
}

}  // namespace

std::vector<TranscriptEntry> run_script(Session& session, std::string_view script) {
  std::vector<ScriptNode> nodes = parse_script(script);
  std::vector<TranscriptEntry> transcript;
  execute_nodes(session, nodes, transcript);
  return transcript;
}

}  // namespace pico
