#include "picosim/isa.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace pico {

namespace {

struct OpInfo {
  Opcode op;
  std::string_view name;
  OperandShape shape;
};

constexpr OpInfo kOps[] = {
    {Opcode::Const, "CONST", OperandShape::RegImm},
    {Opcode::Mov, "MOV", OperandShape::RegReg},
    {Opcode::Add, "ADD", OperandShape::RegRegReg},
    {Opcode::Sub, "SUB", OperandShape::RegRegReg},
    {Opcode::Mul, "MUL", OperandShape::RegRegReg},
    {Opcode::And, "AND", OperandShape::RegRegReg},
    {Opcode::Or, "OR", OperandShape::RegRegReg},
    {Opcode::Xor, "XOR", OperandShape::RegRegReg},
    {Opcode::Shl, "SHL", OperandShape::RegRegReg},
    {Opcode::Shr, "SHR", OperandShape::RegRegReg},
    {Opcode::CmpEq, "CMPEQ", OperandShape::RegRegReg},
    {Opcode::CmpLt, "CMPLT", OperandShape::RegRegReg},
    {Opcode::Br, "BR", OperandShape::Label},
    {Opcode::Brz, "BRZ", OperandShape::RegLabel},
    {Opcode::Put, "PUT", OperandShape::RegPort},
    {Opcode::Get, "GET", OperandShape::RegPort},
    {Opcode::Nop, "NOP", OperandShape::None},
    {Opcode::Halt, "HALT", OperandShape::None},
};

const OpInfo& info(Opcode op) { return kOps[static_cast<int>(op)]; }

}  // namespace

std::string_view mnemonic(Opcode op) { return info(op).name; }

OperandShape operand_shape(Opcode op) { return info(op).shape; }

std::optional<Opcode> opcode_from_mnemonic(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (const auto& o : kOps) {
    if (o.name == upper) return o.op;
  }
  return std::nullopt;
}

std::optional<int> Program::label_index(std::string_view name) const {
  for (const auto& l : labels) {
    if (l.name == name) return l.index;
  }
  return std::nullopt;
}

std::string format_instruction(const Instruction& ins) {
  std::ostringstream os;
  os << mnemonic(ins.op);
  auto reg = [&](int i) { return "r" + std::to_string(ins.regs[i]); };
  switch (operand_shape(ins.op)) {
    case OperandShape::None:
      break;
    case OperandShape::RegImm:
      os << ' ' << reg(0) << ", " << ins.imm;
      break;
    case OperandShape::RegReg:
      os << ' ' << reg(0) << ", " << reg(1);
      break;
    case OperandShape::RegRegReg:
      os << ' ' << reg(0) << ", " << reg(1) << ", " << reg(2);
      break;
    case OperandShape::Label:
      os << ' ' << ins.target;
      break;
    case OperandShape::RegLabel:
      os << ' ' << reg(0) << ", " << ins.target;
      break;
    case OperandShape::RegPort:
      os << ' ' << reg(0) << ", " << ins.port;
      break;
  }
  return os.str();
}

std::vector<std::string> program_lines(const Program& program) {
  std::vector<std::string> out;
  auto emit_labels = [&](int index) {
    for (const auto& l : program.labels) {
      if (l.index == index) out.push_back(l.name + ":");
    }
  };
  for (int i = 0; i < static_cast<int>(program.code.size()); ++i) {
    emit_labels(i);
    out.push_back(format_instruction(program.code[i]));
  }
  emit_labels(static_cast<int>(program.code.size()));
  return out;
}

}  // namespace pico
