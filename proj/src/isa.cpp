#include "wattlens/isa.hpp"

#include <vector>

namespace wattlens {

namespace {

constexpr std::array<std::string_view, kOpcodeCount> kNames = {
    "LDC", "ADD", "SUB", "MUL", "AND", "XOR", "SHL", "LDW", "STW",
    "BRT", "JMP", "CALL", "RET", "FORK", "OUT", "IN", "HALT",
};

constexpr std::array<std::string_view, 6> kClassNames = {"arith", "mem",  "branch",
                                                         "thread", "chan", "misc"};

const std::vector<InstructionSpec>& table() {
  using C = InstrClass;
  static const std::vector<InstructionSpec> specs = {
      {"LDC", 2, 32, false, 1, C::arith},  {"ADD", 3, 16, false, 1, C::arith},
      {"SUB", 3, 16, false, 1, C::arith},  {"MUL", 3, 32, false, 2, C::arith},
      {"AND", 3, 16, false, 1, C::arith},  {"XOR", 3, 16, false, 1, C::arith},
      {"SHL", 3, 16, false, 1, C::arith},  {"LDW", 2, 16, true, 1, C::mem},
      {"STW", 2, 16, true, 1, C::mem},     {"BRT", 2, 16, false, 1, C::branch},
      {"JMP", 1, 16, false, 1, C::branch}, {"CALL", 2, 32, false, 1, C::branch},
      {"RET", 0, 16, false, 1, C::branch}, {"FORK", 2, 32, false, 1, C::thread},
      {"OUT", 2, 16, false, 1, C::chan},   {"IN", 2, 16, false, 1, C::chan},
      {"HALT", 0, 16, false, 1, C::misc},
  };
  return specs;
}

}  // namespace

std::string_view opcode_name(Opcode op) { return kNames[static_cast<int>(op)]; }

std::optional<Opcode> opcode_from_name(std::string_view name) {
  for (int i = 0; i < kOpcodeCount; ++i)
    if (kNames[i] == name) return static_cast<Opcode>(i);
  return std::nullopt;
}

std::string_view class_name(InstrClass c) { return kClassNames[static_cast<int>(c)]; }

std::optional<InstrClass> class_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i)
    if (kClassNames[i] == name) return static_cast<InstrClass>(i);
  return std::nullopt;
}

const InstructionSpec& isa_spec(Opcode op) { return table()[static_cast<int>(op)]; }

}  // namespace wattlens
