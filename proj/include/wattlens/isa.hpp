#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace wattlens {

// The EIR instruction set. HALT is the implicit program terminator but is
// still an issued instruction with its own energy cost.
enum class Opcode : std::uint8_t {
  LDC, ADD, SUB, MUL, AND, XOR, SHL, LDW, STW,
  BRT, JMP, CALL, RET, FORK, OUT, IN, HALT,
};

inline constexpr int kOpcodeCount = 17;

enum class InstrClass : std::uint8_t { arith, mem, branch, thread, chan, misc };

// Static features of an instruction. These are what the feature-based
// power estimator compares when an opcode cannot be profiled directly.
struct InstructionSpec {
  std::string opcode;
  int operand_count = 0;  // 0..3
  int encoding_bits = 16;  // 16 or 32
  bool mem_access = false;
  int issue_cycles = 1;
  InstrClass cls = InstrClass::misc;

  friend bool operator==(const InstructionSpec&, const InstructionSpec&) = default;
};

std::string_view opcode_name(Opcode op);
std::optional<Opcode> opcode_from_name(std::string_view name);

std::string_view class_name(InstrClass c);
std::optional<InstrClass> class_from_name(std::string_view name);

// Reference metadata for every opcode. The simulator takes issue_cycles
// from here; models must agree with it.
const InstructionSpec& isa_spec(Opcode op);

inline constexpr std::array<Opcode, kOpcodeCount> all_opcodes() {
  std::array<Opcode, kOpcodeCount> ops{};
  for (int i = 0; i < kOpcodeCount; ++i) ops[i] = static_cast<Opcode>(i);
  return ops;
}

// arith and mem instructions can be issued back to back in a kernel loop.
inline bool is_profileable(InstrClass c) { return c == InstrClass::arith || c == InstrClass::mem; }

}  // namespace wattlens
