#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pico {

// The process instruction set. Every instruction issues in one cycle; PUT and
// GET may additionally put the element to sleep before they complete.
enum class Opcode : std::uint8_t {
  Const,
  Mov,
  Add,
  Sub,
  Mul,
  And,
  Or,
  Xor,
  Shl,
  Shr,
  CmpEq,
  CmpLt,
  Br,
  Brz,
  Put,
  Get,
  Nop,
  Halt,
};

inline constexpr int kNumRegisters = 16;

std::string_view mnemonic(Opcode op);
std::optional<Opcode> opcode_from_mnemonic(std::string_view text);

// Operand layout of an opcode, used by both the parser and the printer.
enum class OperandShape { None, RegImm, RegReg, RegRegReg, Label, RegLabel, RegPort };
OperandShape operand_shape(Opcode op);

struct Instruction {
  Opcode op = Opcode::Nop;
  std::array<std::uint8_t, 3> regs{};
  std::uint32_t imm = 0;
  std::string target;  // BR / BRZ label
  std::string port;    // PUT / GET port name
  int line = 0;

  friend bool operator==(const Instruction& a, const Instruction& b) {
    return a.op == b.op && a.regs == b.regs && a.imm == b.imm && a.target == b.target &&
           a.port == b.port;
  }
};

struct Label {
  std::string name;
  int index = 0;  // instruction the label precedes; may equal code.size()
  friend bool operator==(const Label&, const Label&) = default;
};

struct Program {
  std::vector<Instruction> code;
  std::vector<Label> labels;
  friend bool operator==(const Program&, const Program&) = default;

  std::optional<int> label_index(std::string_view name) const;
};

std::string format_instruction(const Instruction& ins);

// One label or instruction per line, labels as "name:".
std::vector<std::string> program_lines(const Program& program);

// Instruction memory per element class, in instructions.
inline constexpr int kStanMemory = 256;
inline constexpr int kCtrlMemory = 1024;
inline constexpr int kMemMemory = 512;

}  // namespace pico
