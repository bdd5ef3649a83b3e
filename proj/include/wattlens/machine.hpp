#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wattlens/isa.hpp"

namespace wattlens {

inline constexpr int kRegisterCount = 12;
inline constexpr int kMemoryWords = 1024;
inline constexpr int kChannelCount = 16;

// `@bound hi` or `@bound lo..hi`: how many times the annotated back edge may
// be taken per entry into its loop.
struct LoopBound {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  friend bool operator==(const LoopBound&, const LoopBound&) = default;
};

struct Instruction {
  Opcode op = Opcode::HALT;
  // Register operands in textual order; unused slots are -1.
  std::array<int, 3> regs{-1, -1, -1};
  // LDC immediate, or channel number for IN/OUT.
  std::int64_t imm = 0;
  // Branch label or CALL/FORK function name.
  std::string target;
  std::optional<LoopBound> bound;
  int line = 0;

  friend bool operator==(const Instruction& a, const Instruction& b) {
    return a.op == b.op && a.regs == b.regs && a.imm == b.imm && a.target == b.target && a.bound == b.bound;
  }
};

enum class Terminator { fallthrough, jump, branch, ret, halt };

struct BasicBlock {
  std::string label;
  std::vector<Instruction> instructions;

  Terminator terminator() const;
  friend bool operator==(const BasicBlock&, const BasicBlock&) = default;
};

struct Function {
  std::string name;
  std::vector<int> params;  // register numbers
  std::vector<BasicBlock> blocks;  // blocks[0] is the entry
  // Keyed by the index of the block whose final branch is the back edge.
  std::map<int, LoopBound> loop_bounds;

  int block_index(const std::string& label) const;  // -1 if absent
  friend bool operator==(const Function& a, const Function& b) {
    return a.name == b.name && a.params == b.params && a.blocks == b.blocks && a.loop_bounds == b.loop_bounds;
  }
};

// Declared input domain for exhaustive drivers: a register of the entry
// thread or a memory word, ranging over lo..hi inclusive.
struct InputDomain {
  bool is_memory = false;
  int index = 0;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::string name() const;
  friend bool operator==(const InputDomain&, const InputDomain&) = default;
};

struct Program {
  std::vector<Function> functions;
  std::string entry;
  std::vector<InputDomain> inputs;

  int function_index(const std::string& name) const;  // -1 if absent
  const Function& entry_function() const;
  friend bool operator==(const Program&, const Program&) = default;
};

Program parse_program(const std::string& text);
Program load_program(const std::string& path);
std::string print_program(const Program& program);

// Successor blocks of block `b` inside `f` (taken target first for BRT).
std::vector<int> successors(const Function& f, int b);

struct Loop {
  int header = -1;
  std::vector<int> blocks;  // sorted, includes the header
  std::vector<std::pair<int, int>> back_edges;
  int parent = -1;  // index into FunctionCfg::loops, -1 for outermost
  int depth = 1;
};

struct FunctionCfg {
  std::vector<std::vector<int>> succ;
  std::vector<std::vector<int>> pred;
  std::vector<bool> reachable;
  // Immediate dominator of each reachable block; the entry maps to itself,
  // unreachable blocks to -1.
  std::vector<int> idom;
  std::vector<Loop> loops;  // inner loops always come after their parents
  std::vector<int> innermost_loop;  // per block, -1 if outside every loop
  bool reducible = true;

  bool dominates(int a, int b) const;
};

struct Cfg {
  std::vector<FunctionCfg> functions;  // parallel to Program::functions
};

FunctionCfg build_function_cfg(const Function& f);
Cfg build_cfg(const Program& program);

// Empty iff every function is reducible and every back edge carries @bound.
std::vector<std::string> validate_for_analysis(const Program& program, const Cfg& cfg);

}  // namespace wattlens
