#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "picosim/error.hpp"
#include "picosim/isa.hpp"

namespace pico {

enum class Signedness { Signed, Unsigned, Raw };
enum class Direction { In, Out };
enum class AeClass { Stan, Ctrl, Mem };
enum class SignalMode { Sync, Async };
enum class Builtin { None, FileSource, FileSink };

std::string_view to_string(Signedness s);
std::string_view to_string(Direction d);
std::string_view to_string(AeClass c);
std::string_view to_string(SignalMode m);
std::string_view to_string(Builtin b);
std::optional<AeClass> ae_class_from(std::string_view text);
int memory_limit(AeClass c);

// Communication types are nominal: two types are compatible only when name,
// width and signedness all agree.
struct ValueType {
  std::string name;
  int width = 32;
  Signedness sign = Signedness::Unsigned;

  friend bool operator==(const ValueType&, const ValueType&) = default;
  std::string describe() const;
};

inline constexpr int kMaxTypeWidth = 32;

struct SourceLoc {
  int line = 0;
  int col = 0;
};

// A type as written: either an inline `unsigned(16)` or a named alias.
struct TypeExpr {
  bool is_alias = false;
  std::string alias;
  Signedness sign = Signedness::Unsigned;
  int width = 32;
  SourceLoc loc;

  friend bool operator==(const TypeExpr& a, const TypeExpr& b) {
    if (a.is_alias != b.is_alias) return false;
    return a.is_alias ? a.alias == b.alias : (a.sign == b.sign && a.width == b.width);
  }
  std::string text() const;
};

struct TypeDef {
  std::string name;
  Signedness sign = Signedness::Unsigned;
  int width = 32;
  SourceLoc loc;
  friend bool operator==(const TypeDef& a, const TypeDef& b) {
    return a.name == b.name && a.sign == b.sign && a.width == b.width;
  }
};

struct PortDecl {
  std::string name;
  Direction dir = Direction::In;
  TypeExpr type;
  SourceLoc loc;
  friend bool operator==(const PortDecl& a, const PortDecl& b) {
    return a.name == b.name && a.dir == b.dir && a.type == b.type;
  }
};

// `instance.port`; the instance name `self` refers to the enclosing
// composite's own ports (only valid in `connect`).
struct EndpointRef {
  std::string instance;
  std::string port;
  SourceLoc loc;
  friend bool operator==(const EndpointRef& a, const EndpointRef& b) {
    return a.instance == b.instance && a.port == b.port;
  }
  std::string text() const { return instance + "." + port; }
};

inline constexpr std::string_view kSelf = "self";

struct SignalDecl {
  std::string id;
  TypeExpr type;
  int period = 1;
  SignalMode mode = SignalMode::Sync;
  EndpointRef source;
  std::vector<EndpointRef> dests;
  SourceLoc loc;
  friend bool operator==(const SignalDecl& a, const SignalDecl& b) {
    return a.id == b.id && a.type == b.type && a.period == b.period && a.mode == b.mode &&
           a.source == b.source && a.dests == b.dests;
  }
};

// Pass-through wiring between a composite's own port and its children.
struct ConnectDecl {
  EndpointRef from;
  std::vector<EndpointRef> to;
  SourceLoc loc;
  friend bool operator==(const ConnectDecl& a, const ConnectDecl& b) {
    return a.from == b.from && a.to == b.to;
  }
};

struct InstanceDecl {
  std::string name;
  std::string decl;
  SourceLoc loc;
  friend bool operator==(const InstanceDecl& a, const InstanceDecl& b) {
    return a.name == b.name && a.decl == b.decl;
  }
};

struct ProcessDecl {
  std::string name;
  AeClass ae_class = AeClass::Stan;
  std::vector<PortDecl> ports;
  std::optional<Program> program;
  Builtin builtin = Builtin::None;
  std::vector<InstanceDecl> instances;
  std::vector<SignalDecl> signals;
  std::vector<ConnectDecl> connects;
  SourceLoc loc;

  bool is_leaf() const { return program.has_value() || builtin != Builtin::None; }
  const PortDecl* find_port(std::string_view port) const;

  friend bool operator==(const ProcessDecl& a, const ProcessDecl& b) {
    return a.name == b.name && a.ae_class == b.ae_class && a.ports == b.ports &&
           a.program == b.program && a.builtin == b.builtin && a.instances == b.instances &&
           a.signals == b.signals && a.connects == b.connects;
  }
};

struct Design {
  std::vector<TypeDef> types;
  std::vector<ProcessDecl> processes;
  std::string top;
  SourceLoc top_loc;

  const ProcessDecl* find_process(std::string_view name) const;
  friend bool operator==(const Design& a, const Design& b) {
    return a.types == b.types && a.processes == b.processes && a.top == b.top;
  }
};

Design parse_design(std::string_view text);
// Parses a bare instruction listing (one label or instruction per line or
// separated by whitespace), as stored in compiled artifacts.
Program parse_program(std::string_view text);

// Canonical source form; parse_design(print_design(d)) == d.
std::string print_design(const Design& design);

struct TypeIssue {
  std::string message;
  std::string signal;  // empty when the issue is not about a signal
  std::string source_type;
  std::string dest_type;
  SourceLoc loc;
  SourceLoc other_loc;

  std::string describe() const;
};

class TypeCheckError : public Error {
 public:
  explicit TypeCheckError(std::vector<TypeIssue> issues);
  const std::vector<TypeIssue>& issues() const { return issues_; }

 private:
  std::vector<TypeIssue> issues_;
};

// Runs every check and returns all violations.
std::vector<TypeIssue> check_types(const Design& design);

class TypedDesign {
 public:
  const Design& design() const { return design_; }
  ValueType resolve(const TypeExpr& expr) const;

 private:
  friend TypedDesign typecheck(Design design);
  Design design_;
};

// Throws TypeCheckError carrying every violation.
TypedDesign typecheck(Design design);

// One node of the instantiation tree.
struct ScopeNode {
  std::string path;
  std::string name;
  std::string decl;
  bool composite = false;
  int child_count = 0;
  friend bool operator==(const ScopeNode&, const ScopeNode&) = default;
};

struct FlatPort {
  std::string name;
  Direction dir = Direction::In;
  ValueType type;
  friend bool operator==(const FlatPort&, const FlatPort&) = default;
};

struct FlatInstance {
  std::string path;
  std::string decl;
  AeClass ae_class = AeClass::Stan;
  std::vector<FlatPort> ports;
  Program program;
  Builtin builtin = Builtin::None;

  int port_index(std::string_view port) const;
  friend bool operator==(const FlatInstance&, const FlatInstance&) = default;
};

struct FlatEndpoint {
  std::string instance;
  std::string port;
  std::string text() const { return instance + "." + port; }
  friend bool operator==(const FlatEndpoint&, const FlatEndpoint&) = default;
  friend auto operator<=>(const FlatEndpoint&, const FlatEndpoint&) = default;
};

FlatEndpoint parse_flat_endpoint(std::string_view text);

struct FlatSignal {
  std::string id;
  ValueType type;
  SignalMode mode = SignalMode::Sync;
  int period = 1;
  FlatEndpoint source;
  std::vector<FlatEndpoint> dests;
  friend bool operator==(const FlatSignal&, const FlatSignal&) = default;
};

// Leaf instances sorted by path and signals sorted by id. Never mutated after
// elaboration.
struct FlatDesign {
  std::string name;
  std::vector<FlatInstance> instances;
  std::vector<FlatSignal> signals;
  std::vector<ScopeNode> tree;  // every instance, composite or leaf, preorder

  int instance_index(std::string_view path) const;
  int signal_index(std::string_view id) const;
  // Exact id, or the unique signal whose last path component matches.
  int find_signal(std::string_view name) const;
  const ScopeNode* scope(std::string_view path) const;
  friend bool operator==(const FlatDesign&, const FlatDesign&) = default;
};

inline constexpr std::string_view kRootPath = "top";

std::vector<ScopeNode> instance_tree(const Design& design);
FlatDesign elaborate(const TypedDesign& design);

// Parse, typecheck and elaborate in one call.
FlatDesign compile_design(std::string_view text);

nlohmann::json to_json(const ValueType& t);
ValueType value_type_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FlatDesign& flat);
FlatDesign flat_design_from_json(const nlohmann::json& j);

}  // namespace pico
