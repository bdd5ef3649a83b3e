#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wattlens/energy.hpp"
#include "wattlens/machine.hpp"
#include "wattlens/model.hpp"
#include "wattlens/simulator.hpp"
#include "wattlens/staticanalysis.hpp"

namespace wattlens::hir {

enum class BinOp { add, sub, mul, band, bxor, shl };
enum class RelOp { lt, le, gt, ge, eq, ne, nz };

struct Expr {
  enum class Kind { constant, var, index, call, binary };
  Kind kind = Kind::constant;
  std::uint32_t value = 0;
  std::string name;  // variable, array or callee
  BinOp op = BinOp::add;
  std::vector<Expr> args;  // operands, index or call arguments
  int line = 0;
};

struct Cond {
  RelOp op = RelOp::nz;
  Expr a;
  Expr b;
};

enum class StmtKind { var_decl, assign, store, if_, for_, while_, return_, call };

struct Stmt {
  StmtKind kind = StmtKind::assign;
  int id = 0;
  int line = 0;
  std::string name;  // variable, array, loop index or callee
  Expr value;  // assigned, stored, returned value; call; for lower bound
  Expr index;  // store index; for upper bound
  Cond cond;
  bool has_value = true;  // false for a bare `return;`
  std::vector<Stmt> body;
  std::vector<Stmt> else_body;
  bool has_else = false;
  std::int64_t bound = 0;  // while @bound: completed iterations per entry
};

struct Param {
  std::string name;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

struct HirFunction {
  std::string name;
  std::vector<Param> params;
  std::vector<Stmt> body;
  int glue_id = 0;  // pseudo-statement owning compiler glue
  int line = 0;
};

struct ArrayDecl {
  std::string name;
  int size = 0;
  int base = 0;  // word address
};

struct HirProgram {
  std::vector<ArrayDecl> arrays;
  std::vector<HirFunction> functions;
  int stmt_count = 0;  // real statements are numbered 1..stmt_count

  const HirFunction* find(const std::string& name) const;
  const ArrayDecl* array(const std::string& name) const;
};

// Throws ParseError with line/column; type and scope errors are ParseError
// too and carry the offending line.
HirProgram parse_hir(const std::string& text);
HirProgram load_hir(const std::string& path);

struct HirResult {
  std::uint32_t value = 0;  // main's return value
  std::vector<std::uint32_t> memory;
};

// Reference semantics: 32-bit wrapping arithmetic, a < b iff the signed
// 32-bit difference is negative. Inputs bind main's parameters by position
// and memory words by address. Every call's arguments, read as signed
// 32-bit values, must lie in the callee's parameter domains.
// Throws SimulationError on out-of-range inputs or accesses, a while loop
// completing more iterations than its @bound, or running out of fuel.
HirResult interpret(const HirProgram& program, const Inputs& inputs, std::int64_t fuel = 10'000'000);

// Compiler-emitted code is attributed to the statement and the part of it
// that produced it.
enum class Part { main, entry, iteration, then_join, else_join, exit_jump, latch };
std::string_view part_name(Part p);

struct MapEntry {
  int stmt = 0;
  Part part = Part::main;
  std::string function;
  std::string block;
  int index = 0;
};

struct MappingTable {
  std::vector<MapEntry> entries;
};

struct Compiled {
  Program program;
  MappingTable mapping;
};

// Lowers to EIR. The only optimisation is constant folding (expressions,
// conditions and loop guards decided at compile time).
// Throws UnsupportedError for loops whose bounds are not affine in
// parameters and enclosing loop indices, or register pressure over 12.
Compiled compile(const HirProgram& program);

// Empty iff every EIR instruction is mapped exactly once.
std::vector<std::string> check_mapping(const Program& program, const MappingTable& mapping);

using PartKey = std::pair<int, Part>;

struct HirCosts {
  std::map<PartKey, Energy> parts;  // per execution of the part, t = 1
  Energy part(int stmt, Part p) const;
  Energy stmt(int stmt) const;  // sum over parts
};

HirCosts lift_model(const EnergyModel& model, const Program& program, const MappingTable& mapping);

// Structural bound over the AST. Conditions decided by interval analysis
// over parameter domains and loop index ranges prune the dead arm.
// Throws AnalysisError on recursion.
EnergyBound hir_wcec(const HirProgram& program, const HirCosts& costs);

// Closed integer interval; used for loop trip counts and pruning.
struct Interval {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

using IntervalEnv = std::map<std::string, Interval>;

// nullopt when the expression reads anything outside `env` or leaves the
// signed 32-bit range.
std::optional<Interval> eval_interval(const Expr& e, const IntervalEnv& env);
std::optional<bool> decide(const Cond& c, const IntervalEnv& env);

// Interval environment at function entry: parameters never assigned in the
// body, with their declared domains.
IntervalEnv entry_env(const HirFunction& f);

// Variables assigned anywhere in `body` (declarations, assignments, loop
// indices).
void assigned_vars(const std::vector<Stmt>& body, std::map<std::string, bool>& out);

// Trip count range of a for loop under `env`; nullopt if not bounded.
std::optional<Interval> trip_range(const Stmt& loop, const IntervalEnv& env);

// Environment for a for loop's body.
IntervalEnv body_env(const Stmt& loop, const IntervalEnv& env);

std::string describe(const Stmt& s);

}  // namespace wattlens::hir
