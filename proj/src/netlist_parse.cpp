#include <cctype>
#include <charconv>
#include <sstream>

#include "picosim/netlist.hpp"

namespace pico {

namespace {

enum class Tok { Ident, Int, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::uint64_t value = 0;
  int line = 1;
  int col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.line = line_;
      t.col = col_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
          advance();
        }
        t.kind = Tok::Ident;
        t.text = std::string(src_.substr(start, pos_ - start));
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        std::size_t start = pos_;
        int base = 10;
        if (c == '0' && pos_ + 1 < src_.size() && (src_[pos_ + 1] == 'x' || src_[pos_ + 1] == 'X')) {
          base = 16;
          advance();
          advance();
          start = pos_;
        }
        while (pos_ < src_.size() && std::isalnum(static_cast<unsigned char>(src_[pos_]))) advance();
        std::string_view digits = src_.substr(start, pos_ - start);
        auto [ptr, ec] =
            std::from_chars(digits.data(), digits.data() + digits.size(), t.value, base);
        if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size()) {
          throw ParseError(t.line, t.col, "malformed integer literal");
        }
        t.kind = Tok::Int;
        t.text = std::string(digits);
      } else if (std::string_view("{}():;,.=@-").find(c) != std::string_view::npos) {
        t.kind = Tok::Punct;
        t.text = std::string(1, c);
        advance();
      } else {
        throw ParseError(t.line, t.col, std::string("unexpected character '") + c + "'");
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::End:
      return "end of input";
    case Tok::Int:
      return "integer " + t.text;
    default:
      return "'" + t.text + "'";
  }
}

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(Lexer(src).run()) {}

  Design design() {
    Design d;
    while (!at_end()) {
      const Token& t = peek();
      if (is_ident("type")) {
        d.types.push_back(type_def());
      } else if (is_ident("process")) {
        d.processes.push_back(process());
      } else if (is_ident("top")) {
        if (!d.top.empty()) fail(t, "duplicate top declaration");
        next();
        d.top_loc = loc(peek());
        d.top = ident("process name");
        punct(';');
      } else {
        fail(t, "expected 'type', 'process' or 'top' but found " + describe(t));
      }
    }
    if (d.top.empty()) fail(peek(), "missing top declaration");
    return d;
  }

  Program bare_program() {
    Program p = program_body('\0');
    if (!at_end()) fail(peek(), "unexpected " + describe(peek()));
    return p;
  }

 private:
  const Token& peek(int ahead = 0) const {
    std::size_t i = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[i];
  }
  bool at_end() const { return peek().kind == Tok::End; }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  [[noreturn]] void fail(const Token& t, const std::string& msg) const {
    throw ParseError(t.line, t.col, msg);
  }
  static SourceLoc loc(const Token& t) { return {t.line, t.col}; }

  bool is_ident(std::string_view word, int ahead = 0) const {
    return peek(ahead).kind == Tok::Ident && peek(ahead).text == word;
  }
  bool is_punct(char c, int ahead = 0) const {
    return peek(ahead).kind == Tok::Punct && peek(ahead).text[0] == c;
  }

  void punct(char c) {
    if (!is_punct(c)) fail(peek(), std::string("expected '") + c + "' but found " + describe(peek()));
    next();
  }
  void keyword(std::string_view word) {
    if (!is_ident(word)) {
      fail(peek(), "expected '" + std::string(word) + "' but found " + describe(peek()));
    }
    next();
  }
  std::string ident(std::string_view what) {
    if (peek().kind != Tok::Ident) {
      fail(peek(), "expected " + std::string(what) + " but found " + describe(peek()));
    }
    return next().text;
  }
  std::uint64_t integer(std::string_view what) {
    if (peek().kind != Tok::Int) {
      fail(peek(), "expected " + std::string(what) + " but found " + describe(peek()));
    }
    return next().value;
  }

  static std::optional<Signedness> signedness(std::string_view word) {
    if (word == "signed") return Signedness::Signed;
    if (word == "unsigned") return Signedness::Unsigned;
    if (word == "raw") return Signedness::Raw;
    return std::nullopt;
  }

  std::pair<Signedness, int> base_type() {
    const Token& t = peek();
    auto s = signedness(ident("type"));
    if (!s) fail(t, "expected signed, unsigned or raw");
    punct('(');
    const Token& w = peek();
    std::uint64_t width = integer("type width");
    if (width > 4096) fail(w, "type width out of range");
    punct(')');
    return {*s, static_cast<int>(width)};
  }

  TypeExpr type_expr() {
    TypeExpr e;
    e.loc = loc(peek());
    if (peek().kind == Tok::Ident && signedness(peek().text) && is_punct('(', 1)) {
      auto [s, w] = base_type();
      e.sign = s;
      e.width = w;
    } else {
      e.is_alias = true;
      e.alias = ident("type");
    }
    return e;
  }

  TypeDef type_def() {
    TypeDef td;
    td.loc = loc(next());
    const Token& name_tok = peek();
    td.name = ident("type name");
    if (signedness(td.name)) fail(name_tok, "cannot redefine built-in type '" + td.name + "'");
    punct('=');
    auto [s, w] = base_type();
    td.sign = s;
    td.width = w;
    punct(';');
    return td;
  }

  EndpointRef endpoint() {
    EndpointRef r;
    r.loc = loc(peek());
    r.instance = ident("instance name");
    punct('.');
    r.port = ident("port name");
    return r;
  }

  std::vector<EndpointRef> endpoint_list() {
    std::vector<EndpointRef> v{endpoint()};
    while (is_punct(',')) {
      next();
      v.push_back(endpoint());
    }
    return v;
  }

  ProcessDecl process() {
    ProcessDecl p;
    p.loc = loc(next());
    p.name = ident("process name");
    if (is_punct(':')) {
      next();
      const Token& t = peek();
      auto cls = ae_class_from(ident("element class"));
      if (!cls) fail(t, "unknown element class '" + t.text + "' (expected STAN, CTRL or MEM)");
      p.ae_class = *cls;
    }
    punct('{');
    while (!is_punct('}')) {
      const Token& t = peek();
      if (t.kind == Tok::End) fail(t, "expected '}' to close process '" + p.name + "' but found end of input");
      if (is_ident("in") || is_ident("out")) {
        PortDecl port;
        port.loc = loc(t);
        port.dir = next().text == "in" ? Direction::In : Direction::Out;
        port.name = ident("port name");
        punct(':');
        port.type = type_expr();
        punct(';');
        p.ports.push_back(std::move(port));
      } else if (is_ident("program")) {
        if (p.program) fail(t, "duplicate program block in '" + p.name + "'");
        next();
        punct('{');
        p.program = program_body('}');
        punct('}');
      } else if (is_ident("library")) {
        if (p.builtin != Builtin::None) fail(t, "duplicate library body in '" + p.name + "'");
        next();
        const Token& which = peek();
        std::string name = ident("library element");
        if (name == "file_source") {
          p.builtin = Builtin::FileSource;
        } else if (name == "file_sink") {
          p.builtin = Builtin::FileSink;
        } else {
          fail(which, "unknown library element '" + name + "'");
        }
        punct(';');
      } else if (is_ident("instance")) {
        InstanceDecl inst;
        inst.loc = loc(next());
        inst.name = ident("instance name");
        punct(':');
        inst.decl = ident("process name");
        punct(';');
        p.instances.push_back(std::move(inst));
      } else if (is_ident("signal")) {
        p.signals.push_back(signal());
      } else if (is_ident("connect")) {
        ConnectDecl c;
        c.loc = loc(next());
        c.from = endpoint();
        keyword("to");
        c.to = endpoint_list();
        punct(';');
        p.connects.push_back(std::move(c));
      } else {
        fail(t, "unexpected " + describe(t) + " in process '" + p.name + "'");
      }
    }
    punct('}');
    return p;
  }

  SignalDecl signal() {
    SignalDecl s;
    s.loc = loc(next());
    s.id = ident("signal id");
    punct(':');
    s.type = type_expr();
    if (is_punct('@')) {
      next();
      keyword("every");
      const Token& t = peek();
      std::uint64_t period = integer("period");
      if (period > 1u << 20) fail(t, "period out of range");
      s.period = static_cast<int>(period);
    }
    if (is_ident("sync")) {
      next();
      s.mode = SignalMode::Sync;
    } else if (is_ident("async")) {
      next();
      s.mode = SignalMode::Async;
    }
    keyword("from");
    s.source = endpoint();
    keyword("to");
    s.dests = endpoint_list();
    punct(';');
    return s;
  }

  std::uint8_t reg() {
    const Token& t = peek();
    std::string name = ident("register");
    if (name.size() < 2 || (name[0] != 'r' && name[0] != 'R')) fail(t, "expected register r0..r15");
    int n = 0;
    for (std::size_t i = 1; i < name.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(name[i]))) fail(t, "expected register r0..r15");
      n = n * 10 + (name[i] - '0');
      if (n >= kNumRegisters) fail(t, "register out of range: " + name);
    }
    return static_cast<std::uint8_t>(n);
  }

  std::uint32_t immediate() {
    bool neg = false;
    if (is_punct('-')) {
      next();
      neg = true;
    }
    const Token& t = peek();
    std::uint64_t v = integer("immediate");
    if (neg ? v > (1ull << 31) : v > 0xffffffffull) fail(t, "immediate does not fit in 32 bits");
    return neg ? static_cast<std::uint32_t>(-static_cast<std::int64_t>(v)) : static_cast<std::uint32_t>(v);
  }

  // Reads labels and instructions until `close` (or end of input when '\0').
  Program program_body(char close) {
    Program prog;
    for (;;) {
      const Token& t = peek();
      if (close != '\0' && is_punct(close)) break;
      if (t.kind == Tok::End) {
        if (close == '\0') break;
        fail(t, "expected '}' to close program but found end of input");
      }
      if (t.kind != Tok::Ident) fail(t, "expected instruction but found " + describe(t));
      if (is_punct(':', 1)) {
        std::string name = next().text;
        next();
        if (prog.label_index(name)) fail(t, "duplicate label '" + name + "'");
        prog.labels.push_back({name, static_cast<int>(prog.code.size())});
        continue;
      }
      auto op = opcode_from_mnemonic(t.text);
      if (!op) fail(t, "unknown instruction '" + t.text + "'");
      next();
      Instruction ins;
      ins.op = *op;
      ins.line = t.line;
      switch (operand_shape(*op)) {
        case OperandShape::None:
          break;
        case OperandShape::RegImm:
          ins.regs[0] = reg();
          punct(',');
          ins.imm = immediate();
          break;
        case OperandShape::RegReg:
          ins.regs[0] = reg();
          punct(',');
          ins.regs[1] = reg();
          break;
        case OperandShape::RegRegReg:
          ins.regs[0] = reg();
          punct(',');
          ins.regs[1] = reg();
          punct(',');
          ins.regs[2] = reg();
          break;
        case OperandShape::Label:
          ins.target = ident("label");
          break;
        case OperandShape::RegLabel:
          ins.regs[0] = reg();
          punct(',');
          ins.target = ident("label");
          break;
        case OperandShape::RegPort:
          ins.regs[0] = reg();
          punct(',');
          ins.port = ident("port name");
          break;
      }
      prog.code.push_back(std::move(ins));
    }
    return prog;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

void print_endpoints(std::ostream& os, const std::vector<EndpointRef>& eps) {
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (i) os << ", ";
    os << eps[i].text();
  }
}

}  // namespace

Design parse_design(std::string_view text) { return Parser(text).design(); }

Program parse_program(std::string_view text) { return Parser(text).bare_program(); }

std::string print_design(const Design& d) {
  std::ostringstream os;
  for (const auto& t : d.types) {
    os << "type " << t.name << " = " << to_string(t.sign) << "(" << t.width << ");\n";
  }
  if (!d.types.empty()) os << "\n";
  for (const auto& p : d.processes) {
    os << "process " << p.name << " : " << to_string(p.ae_class) << " {\n";
    for (const auto& port : p.ports) {
      os << "  " << to_string(port.dir) << " " << port.name << " : " << port.type.text() << ";\n";
    }
    if (p.builtin != Builtin::None) os << "  library " << to_string(p.builtin) << ";\n";
    if (p.program) {
      os << "  program {\n";
      for (const auto& line : program_lines(*p.program)) {
        os << (line.back() == ':' ? "  " : "    ") << line << "\n";
      }
      os << "  }\n";
    }
    for (const auto& i : p.instances) os << "  instance " << i.name << " : " << i.decl << ";\n";
    for (const auto& s : p.signals) {
      os << "  signal " << s.id << " : " << s.type.text() << " @every " << s.period << " "
         << to_string(s.mode) << " from " << s.source.text() << " to ";
      print_endpoints(os, s.dests);
      os << ";\n";
    }
    for (const auto& c : p.connects) {
      os << "  connect " << c.from.text() << " to ";
      print_endpoints(os, c.to);
      os << ";\n";
    }
    os << "}\n\n";
  }
  os << "top " << d.top << ";\n";
  return os.str();
}

}  // namespace pico
