#pragma once

#include <cstdint>
#include <exception>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "picosim/analysis.hpp"
#include "picosim/engine.hpp"
#include "picosim/instruments.hpp"

namespace pico {

// A verb with positional arguments. The JSON form may carry the arguments as
// an array, as an object of named fields, or as top-level fields.
struct Command {
  nlohmann::json id;  // null when absent
  std::string verb;
  std::vector<std::string> args;
};

Command parse_command_text(std::string_view line);
Command parse_command_json(const nlohmann::json& j);
// Canonical one-line form; parse_command_text(command_text(c)) == c.
std::string command_text(const Command& c);

bool is_known_verb(std::string_view verb);
// Verbs recorded in the journal.
bool is_state_changing(const Command& c);

struct CommandResult {
  bool ok = true;
  nlohmann::json data;
  std::string error_type;
  std::string error;

  nlohmann::json to_json(const nlohmann::json& id = nullptr) const;
};

// Short class name of a pico::Error ("UnknownSignal", ...), "Error" otherwise.
std::string error_type_name(const std::exception& e);

class Session {
 public:
  using EventCallback = std::function<void(const nlohmann::json& event)>;

  Session() = default;
  // Loads the compiled artifact at `path`; the journal starts with the load.
  explicit Session(const std::string& path);
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;
  ~Session();

  CommandResult execute(const Command& cmd);
  CommandResult execute_line(std::string_view line) { return execute(parse_command_text(line)); }

  bool loaded() const { return state_.has_value(); }
  const SystemState& state() const;
  const CompiledArtifact& artifact() const;
  const std::vector<std::string>& journal() const { return journal_; }
  bool quit_requested() const { return quit_; }

  // Receives {event, data} objects: "status" and "probes" after each pause,
  // "trace" per event while trace forwarding is on.
  void set_event_callback(EventCallback cb) { on_event_ = std::move(cb); }
  void set_trace_forwarding(bool on) { forward_trace_ = on; }

 private:
  nlohmann::json dispatch(const Command& cmd);
  void require_loaded() const;
  void load(const std::string& path);
  void reset();
  void adopt(CompiledArtifact next);
  nlohmann::json advance(std::uint64_t n, bool honour_breakpoints);
  nlohmann::json status_json() const;
  nlohmann::json inspect_json(const std::string& instance) const;
  void emit(const std::string& event, nlohmann::json data);

  std::string path_;
  std::shared_ptr<const CompiledArtifact> base_;
  std::shared_ptr<const CompiledArtifact> artifact_;
  std::optional<SystemState> state_;
  std::set<Breakpoint> breakpoints_;
  bool resume_ = false;
  std::vector<TraceEvent> transfers_;
  std::unique_ptr<std::ofstream> trace_file_;
  std::string trace_path_;
  std::vector<std::string> journal_;
  bool quit_ = false;
  EventCallback on_event_;
  bool forward_trace_ = false;
};

struct TranscriptEntry {
  int line = 0;
  std::string command;
  CommandResult result;
};

class ScriptError : public Error {
 public:
  ScriptError(int line, const std::string& msg, std::vector<TranscriptEntry> transcript = {});
  int line() const { return line_; }
  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }

 private:
  int line_;
  std::vector<TranscriptEntry> transcript_;
};

// Newline-separated commands, `#` comments, `try <command>` to continue past
// an error, and `repeat N { ... }` blocks (inline with ';' or multi-line).
// The whole script is parsed before anything runs.
std::vector<TranscriptEntry> run_script(Session& session, std::string_view script);

// Protocol: line-delimited JSON. Requests {id, verb, args}; replies
// {id, ok, data} or {id, ok: false, error: {type, message}}; events
// {event, data}.
class Server {
 public:
  // "unix:/path", a bare path, or "tcp:host:port".
  Server(Session& session, std::string endpoint);
  ~Server();

  // Binds and listens; returns the bound address (the port is filled in when
  // 0 was requested).
  std::string listen();
  // Runs until quit or stop(). Call listen() first.
  void serve();
  void stop();

  // Handles one request line outside any connection (no controller check).
  std::string handle_line(std::string_view line);

  static constexpr std::size_t kEventQueueLimit = 1024;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pico
