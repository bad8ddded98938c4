#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "picosim/netlist.hpp"

namespace pico {

using nlohmann::json;

std::string_view to_string(Signedness s) {
  switch (s) {
    case Signedness::Signed:
      return "signed";
    case Signedness::Unsigned:
      return "unsigned";
    case Signedness::Raw:
      return "raw";
  }
  return "?";
}

std::string_view to_string(Direction d) { return d == Direction::In ? "in" : "out"; }

std::string_view to_string(AeClass c) {
  switch (c) {
    case AeClass::Stan:
      return "STAN";
    case AeClass::Ctrl:
      return "CTRL";
    case AeClass::Mem:
      return "MEM";
  }
  return "?";
}

std::string_view to_string(SignalMode m) { return m == SignalMode::Sync ? "sync" : "async"; }

std::string_view to_string(Builtin b) {
  switch (b) {
    case Builtin::None:
      return "none";
    case Builtin::FileSource:
      return "file_source";
    case Builtin::FileSink:
      return "file_sink";
  }
  return "?";
}

std::optional<AeClass> ae_class_from(std::string_view text) {
  if (text == "STAN") return AeClass::Stan;
  if (text == "CTRL") return AeClass::Ctrl;
  if (text == "MEM") return AeClass::Mem;
  return std::nullopt;
}

int memory_limit(AeClass c) {
  switch (c) {
    case AeClass::Stan:
      return kStanMemory;
    case AeClass::Ctrl:
      return kCtrlMemory;
    case AeClass::Mem:
      return kMemMemory;
  }
  return 0;
}

std::string ValueType::describe() const {
  std::string base = std::string(to_string(sign)) + "(" + std::to_string(width) + ")";
  return name == base ? base : name + " = " + base;
}

std::string TypeExpr::text() const {
  return is_alias ? alias : std::string(to_string(sign)) + "(" + std::to_string(width) + ")";
}

const PortDecl* ProcessDecl::find_port(std::string_view port) const {
  for (const auto& p : ports) {
    if (p.name == port) return &p;
  }
  return nullptr;
}

const ProcessDecl* Design::find_process(std::string_view name) const {
  for (const auto& p : processes) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::string TypeIssue::describe() const {
  std::ostringstream os;
  os << "line " << loc.line << ":" << loc.col << ": " << message;
  if (!signal.empty()) os << " [signal " << signal << "]";
  if (!source_type.empty() || !dest_type.empty()) {
    os << " (" << source_type << " vs " << dest_type << ")";
  }
  return os.str();
}

namespace {

std::string join_issues(const std::vector<TypeIssue>& issues) {
  std::string out = std::to_string(issues.size()) + " type error(s)";
  for (const auto& i : issues) out += "\n  " + i.describe();
  return out;
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

inline constexpr int kMaxPeriod = 4096;

class Checker {
 public:
  explicit Checker(const Design& d) : d_(d) {}

  std::vector<TypeIssue> run() {
    check_typedefs();
    std::set<std::string> names;
    for (const auto& p : d_.processes) {
      if (!names.insert(p.name).second) issue(p.loc, "duplicate process '" + p.name + "'");
    }
    for (const auto& p : d_.processes) check_process(p);
    if (!d_.find_process(d_.top)) {
      issue(d_.top_loc, "top names unknown process '" + d_.top + "'");
    }
    check_recursion();
    return std::move(issues_);
  }

  std::optional<ValueType> resolve(const TypeExpr& e, bool report) {
    if (!e.is_alias) {
      if (report) check_width(e.width, e.loc, e.text());
      return ValueType{e.text(), e.width, e.sign};
    }
    for (const auto& t : d_.types) {
      if (t.name == e.alias) return ValueType{t.name, t.width, t.sign};
    }
    if (report) issue(e.loc, "unknown type '" + e.alias + "'");
    return std::nullopt;
  }

 private:
  void issue(SourceLoc loc, std::string msg) {
    TypeIssue i;
    i.message = std::move(msg);
    i.loc = loc;
    issues_.push_back(std::move(i));
  }

  void check_width(int width, SourceLoc loc, const std::string& what) {
    if (width < 1) {
      issue(loc, "type " + what + " has zero width");
    } else if (width > kMaxTypeWidth) {
      issue(loc, "type " + what + " is " + std::to_string(width) +
                     " bits wide; communication types are limited to 32 bits");
    }
  }

  void check_typedefs() {
    std::set<std::string> seen;
    for (const auto& t : d_.types) {
      if (!seen.insert(t.name).second) issue(t.loc, "duplicate type '" + t.name + "'");
      check_width(t.width, t.loc, "'" + t.name + "'");
    }
  }

  void check_process(const ProcessDecl& p) {
    std::set<std::string> ports;
    for (const auto& port : p.ports) {
      if (!ports.insert(port.name).second) {
        issue(port.loc, "duplicate port '" + port.name + "' in '" + p.name + "'");
      }
      resolve(port.type, true);
    }
    bool composite = !p.instances.empty() || !p.signals.empty() || !p.connects.empty();
    if (p.program && p.builtin != Builtin::None) {
      issue(p.loc, "process '" + p.name + "' has both a program and a library body");
    }
    if (p.is_leaf() && composite) {
      issue(p.loc, "process '" + p.name + "' is both a leaf and a composite");
    }
    if (p.program) check_program(p);
    if (p.builtin != Builtin::None) {
      Direction want = p.builtin == Builtin::FileSource ? Direction::Out : Direction::In;
      if (p.ports.size() != 1 || p.ports[0].dir != want) {
        issue(p.loc, "library element " + std::string(to_string(p.builtin)) + " in '" + p.name +
                         "' needs exactly one " + std::string(to_string(want)) + " port");
      }
    }
    if (composite) check_composite(p);
  }

  void check_program(const ProcessDecl& p) {
    const Program& prog = *p.program;
    int limit = memory_limit(p.ae_class);
    if (static_cast<int>(prog.code.size()) > limit) {
      issue(p.loc, "program of '" + p.name + "' has " + std::to_string(prog.code.size()) +
                       " instructions; " + std::string(to_string(p.ae_class)) + " holds " +
                       std::to_string(limit));
    }
    for (const auto& ins : prog.code) {
      SourceLoc loc{ins.line, 1};
      auto shape = operand_shape(ins.op);
      if ((shape == OperandShape::Label || shape == OperandShape::RegLabel) &&
          !prog.label_index(ins.target)) {
        issue(loc, "undefined label '" + ins.target + "' in '" + p.name + "'");
      }
      if (shape == OperandShape::RegPort) {
        const PortDecl* port = p.find_port(ins.port);
        Direction want = ins.op == Opcode::Put ? Direction::Out : Direction::In;
        if (!port) {
          issue(loc, "unknown port '" + ins.port + "' in '" + p.name + "'");
        } else if (port->dir != want) {
          issue(loc, std::string(mnemonic(ins.op)) + " on " + std::string(to_string(port->dir)) +
                         " port '" + ins.port + "' in '" + p.name + "'");
        }
      }
    }
  }

  // Resolves an endpoint to the port it names; nullptr after reporting.
  const PortDecl* endpoint_port(const ProcessDecl& p,
                                const std::map<std::string, const ProcessDecl*>& children,
                                const EndpointRef& ep) {
    if (ep.instance == kSelf) {
      const PortDecl* port = p.find_port(ep.port);
      if (!port) issue(ep.loc, "'" + p.name + "' has no port '" + ep.port + "'");
      return port;
    }
    auto it = children.find(ep.instance);
    if (it == children.end()) {
      issue(ep.loc, "unknown instance '" + ep.instance + "' in '" + p.name + "'");
      return nullptr;
    }
    if (!it->second) return nullptr;  // unknown decl, already reported
    const PortDecl* port = it->second->find_port(ep.port);
    if (!port) issue(ep.loc, "'" + it->second->name + "' has no port '" + ep.port + "'");
    return port;
  }

  void check_composite(const ProcessDecl& p) {
    std::map<std::string, const ProcessDecl*> children;
    for (const auto& inst : p.instances) {
      if (inst.name == kSelf) issue(inst.loc, "instance may not be named 'self'");
      const ProcessDecl* decl = d_.find_process(inst.decl);
      if (!decl) issue(inst.loc, "instance '" + inst.name + "' of unknown process '" + inst.decl + "'");
      if (!children.emplace(inst.name, decl).second) {
        issue(inst.loc, "duplicate instance '" + inst.name + "' in '" + p.name + "'");
      }
    }

    std::map<std::string, int> uses;  // "inst.port" -> number of attachments
    auto use = [&](const EndpointRef& ep) {
      if (++uses[ep.text()] == 2) {
        issue(ep.loc, "port " + ep.text() + " in '" + p.name + "' is connected more than once");
      }
    };

    std::set<std::string> ids;
    for (const auto& s : p.signals) {
      if (!ids.insert(s.id).second) issue(s.loc, "duplicate signal '" + s.id + "' in '" + p.name + "'");
      if (!is_power_of_two(s.period) || s.period > kMaxPeriod) {
        TypeIssue i;
        i.message = "period " + std::to_string(s.period) + " must be a power of two in 1..4096";
        i.signal = s.id;
        i.loc = s.loc;
        issues_.push_back(std::move(i));
      }
      auto sig_type = resolve(s.type, true);
      auto check_end = [&](const EndpointRef& ep, Direction want) {
        if (ep.instance == kSelf) {
          issue(ep.loc, "signals connect child instances; use 'connect' for self." + ep.port);
          return;
        }
        const PortDecl* port = endpoint_port(p, children, ep);
        use(ep);
        if (!port) return;
        if (port->dir != want) {
          issue(ep.loc, "signal " + s.id + ": " + ep.text() + " is an " +
                            std::string(to_string(port->dir)) + " port");
        }
        auto port_type = resolve(port->type, false);
        if (sig_type && port_type && !(*sig_type == *port_type)) {
          TypeIssue i;
          i.message = "type mismatch at " + ep.text();
          i.signal = s.id;
          i.source_type = sig_type->describe();
          i.dest_type = port_type->describe();
          i.loc = ep.loc;
          i.other_loc = s.loc;
          issues_.push_back(std::move(i));
        }
      };
      check_end(s.source, Direction::Out);
      for (const auto& d : s.dests) check_end(d, Direction::In);
    }

    for (const auto& c : p.connects) {
      const PortDecl* from = endpoint_port(p, children, c.from);
      bool inbound = c.from.instance == kSelf;
      use(c.from);
      if (from) {
        Direction want = inbound ? Direction::In : Direction::Out;
        if (from->dir != want) {
          issue(c.from.loc, "connect source " + c.from.text() + " must be an " +
                                std::string(to_string(want)) + " port");
        }
      }
      if (!inbound && c.to.size() != 1) {
        issue(c.loc, "an outbound connect drives exactly one self port");
      }
      for (const auto& to : c.to) {
        if ((to.instance == kSelf) == inbound) {
          issue(to.loc, inbound ? "connect from self must target child ports"
                                : "connect from a child must target a self port");
          continue;
        }
        const PortDecl* port = endpoint_port(p, children, to);
        use(to);
        if (!port) continue;
        Direction want = inbound ? Direction::In : Direction::Out;
        if (port->dir != want) {
          issue(to.loc, "connect target " + to.text() + " must be an " +
                            std::string(to_string(want)) + " port");
        }
        if (from) {
          auto a = resolve(from->type, false);
          auto b = resolve(port->type, false);
          if (a && b && !(*a == *b)) {
            TypeIssue i;
            i.message = "type mismatch on connect " + c.from.text() + " -> " + to.text();
            i.source_type = a->describe();
            i.dest_type = b->describe();
            i.loc = to.loc;
            i.other_loc = c.loc;
            issues_.push_back(std::move(i));
          }
        }
      }
    }
  }

  void check_recursion() {
    std::map<std::string, int> state;  // 0 new, 1 on stack, 2 done
    std::function<void(const ProcessDecl&)> visit = [&](const ProcessDecl& p) {
      state[p.name] = 1;
      for (const auto& inst : p.instances) {
        const ProcessDecl* child = d_.find_process(inst.decl);
        if (!child) continue;
        int st = state[child->name];
        if (st == 1) {
          issue(inst.loc, "recursive instantiation of '" + child->name + "'");
        } else if (st == 0) {
          visit(*child);
        }
      }
      state[p.name] = 2;
    };
    for (const auto& p : d_.processes) {
      if (state[p.name] == 0) visit(p);
    }
  }

  const Design& d_;
  std::vector<TypeIssue> issues_;
};

}  // namespace

TypeCheckError::TypeCheckError(std::vector<TypeIssue> issues)
    : Error(join_issues(issues)), issues_(std::move(issues)) {}

std::vector<TypeIssue> check_types(const Design& design) { return Checker(design).run(); }

TypedDesign typecheck(Design design) {
  auto issues = check_types(design);
  if (!issues.empty()) throw TypeCheckError(std::move(issues));
  TypedDesign typed;
  typed.design_ = std::move(design);
  return typed;
}

ValueType TypedDesign::resolve(const TypeExpr& expr) const {
  Checker c(design_);
  auto t = c.resolve(expr, false);
  if (!t) throw Error("unresolved type " + expr.text());
  return *t;
}

// ---------------------------------------------------------------------------
// Elaboration

std::vector<ScopeNode> instance_tree(const Design& design) {
  std::vector<ScopeNode> out;
  std::function<void(const std::string&, const std::string&, const ProcessDecl&, int)> walk =
      [&](const std::string& path, const std::string& name, const ProcessDecl& decl, int depth) {
        if (depth > 256) throw ElaborationError("instantiation too deep at " + path);
        ScopeNode node{path, name, decl.name, !decl.is_leaf(),
                       static_cast<int>(decl.instances.size())};
        out.push_back(node);
        for (const auto& inst : decl.instances) {
          const ProcessDecl* child = design.find_process(inst.decl);
          if (!child) throw ElaborationError("unknown process '" + inst.decl + "'");
          walk(path + "/" + inst.name, inst.name, *child, depth + 1);
        }
      };
  const ProcessDecl* top = design.find_process(design.top);
  if (!top) throw ElaborationError("unknown top process '" + design.top + "'");
  walk(std::string(kRootPath), std::string(kRootPath), *top, 0);
  return out;
}

namespace {

class Elaborator {
 public:
  explicit Elaborator(const TypedDesign& typed) : t_(typed), d_(typed.design()) {}

  FlatDesign run() {
    FlatDesign flat;
    flat.name = d_.top;
    flat.tree = instance_tree(d_);
    for (const auto& node : flat.tree) {
      const ProcessDecl& decl = *d_.find_process(node.decl);
      decls_[node.path] = &decl;
    }
    const ProcessDecl& top = *decls_.at(std::string(kRootPath));
    if (!top.ports.empty() && !top.is_leaf()) {
      throw ElaborationError("composite port " + std::string(kRootPath) + "." + top.ports[0].name +
                             " is dangling (the top process cannot have ports)");
    }
    for (const auto& node : flat.tree) {
      const ProcessDecl& decl = *decls_.at(node.path);
      if (decl.is_leaf()) {
        flat.instances.push_back(leaf(node.path, decl));
      } else {
        composite(node.path, decl, flat);
      }
    }
    std::sort(flat.instances.begin(), flat.instances.end(),
              [](const auto& a, const auto& b) { return a.path < b.path; });
    std::sort(flat.signals.begin(), flat.signals.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });

    std::map<FlatEndpoint, int> attached;
    for (const auto& s : flat.signals) {
      ++attached[s.source];
      for (const auto& d : s.dests) ++attached[d];
    }
    for (const auto& inst : flat.instances) {
      for (const auto& port : inst.ports) {
        FlatEndpoint ep{inst.path, port.name};
        int n = attached[ep];
        if (n == 0) throw ElaborationError("port " + ep.text() + " is not connected to any signal");
        if (n > 1) throw ElaborationError("port " + ep.text() + " is attached to " + std::to_string(n) + " signals");
      }
    }
    return flat;
  }

 private:
  FlatInstance leaf(const std::string& path, const ProcessDecl& decl) {
    FlatInstance inst;
    inst.path = path;
    inst.decl = decl.name;
    inst.ae_class = decl.ae_class;
    inst.builtin = decl.builtin;
    if (decl.program) inst.program = *decl.program;
    for (const auto& p : decl.ports) inst.ports.push_back({p.name, p.dir, t_.resolve(p.type)});
    return inst;
  }

  void composite(const std::string& path, const ProcessDecl& decl, FlatDesign& flat) {
    // Every port of a child composite must be wired from this scope.
    std::set<std::string> used;
    for (const auto& s : decl.signals) {
      used.insert(s.source.text());
      for (const auto& d : s.dests) used.insert(d.text());
    }
    for (const auto& c : decl.connects) {
      used.insert(c.from.text());
      for (const auto& t : c.to) used.insert(t.text());
    }
    for (const auto& inst : decl.instances) {
      const ProcessDecl& child = *decls_.at(path + "/" + inst.name);
      if (child.is_leaf()) continue;
      for (const auto& port : child.ports) {
        if (!used.count(inst.name + "." + port.name)) {
          throw ElaborationError("composite port " + path + "/" + inst.name + "." + port.name +
                                 " is dangling");
        }
      }
    }
    for (const auto& s : decl.signals) {
      FlatSignal fs;
      fs.id = path + "/" + s.id;
      fs.type = t_.resolve(s.type);
      fs.mode = s.mode;
      fs.period = s.period;
      fs.source = driver(path, s.source);
      for (const auto& d : s.dests) {
        for (auto& e : sinks(path, d)) fs.dests.push_back(std::move(e));
      }
      flat.signals.push_back(std::move(fs));
    }
  }

  // The leaf output port ultimately driving `ep` (a child port in scope).
  FlatEndpoint driver(const std::string& scope, const EndpointRef& ep) {
    std::string child_path = scope + "/" + ep.instance;
    const ProcessDecl& child = *decls_.at(child_path);
    if (child.is_leaf()) return {child_path, ep.port};
    for (const auto& c : child.connects) {
      for (const auto& to : c.to) {
        if (to.instance == kSelf && to.port == ep.port) return driver(child_path, c.from);
      }
    }
    throw ElaborationError("composite port " + child_path + "." + ep.port +
                           " is dangling (nothing drives it inside '" + child.name + "')");
  }

  std::vector<FlatEndpoint> sinks(const std::string& scope, const EndpointRef& ep) {
    std::string child_path = scope + "/" + ep.instance;
    const ProcessDecl& child = *decls_.at(child_path);
    if (child.is_leaf()) return {{child_path, ep.port}};
    for (const auto& c : child.connects) {
      if (c.from.instance == kSelf && c.from.port == ep.port) {
        std::vector<FlatEndpoint> out;
        for (const auto& to : c.to) {
          for (auto& e : sinks(child_path, to)) out.push_back(std::move(e));
        }
        return out;
      }
    }
    throw ElaborationError("composite port " + child_path + "." + ep.port +
                           " is dangling (nothing reads it inside '" + child.name + "')");
  }

  const TypedDesign& t_;
  const Design& d_;
  std::map<std::string, const ProcessDecl*> decls_;
};

}  // namespace

FlatDesign elaborate(const TypedDesign& design) { return Elaborator(design).run(); }

FlatDesign compile_design(std::string_view text) { return elaborate(typecheck(parse_design(text))); }

int FlatInstance::port_index(std::string_view port) const {
  for (std::size_t i = 0; i < ports.size(); ++i) {
    if (ports[i].name == port) return static_cast<int>(i);
  }
  return -1;
}

FlatEndpoint parse_flat_endpoint(std::string_view text) {
  auto dot = text.rfind('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == text.size()) {
    throw FormatError("malformed endpoint '" + std::string(text) + "'");
  }
  return {std::string(text.substr(0, dot)), std::string(text.substr(dot + 1))};
}

int FlatDesign::instance_index(std::string_view path) const {
  auto it = std::lower_bound(instances.begin(), instances.end(), path,
                             [](const FlatInstance& i, std::string_view p) { return i.path < p; });
  if (it == instances.end() || it->path != path) return -1;
  return static_cast<int>(it - instances.begin());
}

int FlatDesign::signal_index(std::string_view id) const {
  auto it = std::lower_bound(signals.begin(), signals.end(), id,
                             [](const FlatSignal& s, std::string_view p) { return s.id < p; });
  if (it == signals.end() || it->id != id) return -1;
  return static_cast<int>(it - signals.begin());
}

int FlatDesign::find_signal(std::string_view name) const {
  int exact = signal_index(name);
  if (exact >= 0) return exact;
  int found = -1;
  for (std::size_t i = 0; i < signals.size(); ++i) {
    std::string_view id = signals[i].id;
    auto slash = id.rfind('/');
    if (id.substr(slash + 1) == name) {
      if (found >= 0) return -1;
      found = static_cast<int>(i);
    }
  }
  return found;
}

const ScopeNode* FlatDesign::scope(std::string_view path) const {
  for (const auto& n : tree) {
    if (n.path == path) return &n;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const ValueType& t) {
  return {{"name", t.name}, {"width", t.width}, {"signedness", to_string(t.sign)}};
}

ValueType value_type_from_json(const json& j) {
  ValueType t;
  t.name = j.at("name").get<std::string>();
  t.width = j.at("width").get<int>();
  std::string s = j.at("signedness").get<std::string>();
  if (s == "signed") {
    t.sign = Signedness::Signed;
  } else if (s == "unsigned") {
    t.sign = Signedness::Unsigned;
  } else if (s == "raw") {
    t.sign = Signedness::Raw;
  } else {
    throw FormatError("bad signedness '" + s + "'");
  }
  return t;
}

json to_json(const FlatDesign& flat) {
  json instances = json::array();
  for (const auto& i : flat.instances) {
    json ports = json::array();
    for (const auto& p : i.ports) {
      ports.push_back({{"name", p.name}, {"dir", to_string(p.dir)}, {"type", to_json(p.type)}});
    }
    json inst = {{"path", i.path}, {"decl", i.decl}, {"ae_class", to_string(i.ae_class)},
                 {"ports", ports}};
    if (i.builtin != Builtin::None) {
      inst["builtin"] = to_string(i.builtin);
    } else {
      inst["program"] = program_lines(i.program);
    }
    instances.push_back(std::move(inst));
  }
  json signals = json::array();
  for (const auto& s : flat.signals) {
    json dests = json::array();
    for (const auto& d : s.dests) dests.push_back(d.text());
    signals.push_back({{"id", s.id},
                       {"type", to_json(s.type)},
                       {"mode", to_string(s.mode)},
                       {"period", s.period},
                       {"source", s.source.text()},
                       {"dests", dests}});
  }
  json tree = json::array();
  for (const auto& n : flat.tree) {
    tree.push_back({{"path", n.path},
                    {"name", n.name},
                    {"decl", n.decl},
                    {"kind", n.composite ? "composite" : "leaf"},
                    {"children", n.child_count}});
  }
  return {{"name", flat.name}, {"instances", instances}, {"signals", signals}, {"tree", tree}};
}

FlatDesign flat_design_from_json(const json& j) {
  FlatDesign flat;
  flat.name = j.at("name").get<std::string>();
  for (const auto& ji : j.at("instances")) {
    FlatInstance inst;
    inst.path = ji.at("path").get<std::string>();
    inst.decl = ji.at("decl").get<std::string>();
    auto cls = ae_class_from(ji.at("ae_class").get<std::string>());
    if (!cls) throw FormatError("bad ae_class for " + inst.path);
    inst.ae_class = *cls;
    for (const auto& jp : ji.at("ports")) {
      FlatPort p;
      p.name = jp.at("name").get<std::string>();
      p.dir = jp.at("dir").get<std::string>() == "in" ? Direction::In : Direction::Out;
      p.type = value_type_from_json(jp.at("type"));
      inst.ports.push_back(std::move(p));
    }
    if (ji.contains("builtin")) {
      std::string b = ji.at("builtin").get<std::string>();
      if (b == "file_source") {
        inst.builtin = Builtin::FileSource;
      } else if (b == "file_sink") {
        inst.builtin = Builtin::FileSink;
      } else {
        throw FormatError("bad builtin '" + b + "'");
      }
    } else {
      std::string text;
      for (const auto& line : ji.at("program")) text += line.get<std::string>() + "\n";
      inst.program = parse_program(text);
    }
    flat.instances.push_back(std::move(inst));
  }
  for (const auto& js : j.at("signals")) {
    FlatSignal s;
    s.id = js.at("id").get<std::string>();
    s.type = value_type_from_json(js.at("type"));
    s.mode = js.at("mode").get<std::string>() == "async" ? SignalMode::Async : SignalMode::Sync;
    s.period = js.at("period").get<int>();
    s.source = parse_flat_endpoint(js.at("source").get<std::string>());
    for (const auto& d : js.at("dests")) s.dests.push_back(parse_flat_endpoint(d.get<std::string>()));
    flat.signals.push_back(std::move(s));
  }
  for (const auto& jn : j.at("tree")) {
    flat.tree.push_back({jn.at("path").get<std::string>(), jn.at("name").get<std::string>(),
                         jn.at("decl").get<std::string>(), jn.at("kind").get<std::string>() == "composite",
                         jn.at("children").get<int>()});
  }
  return flat;
}

}  // namespace pico
