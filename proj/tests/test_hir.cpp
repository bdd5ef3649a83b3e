#include <filesystem>
#include <random>

#include "doctest.h"
#include "random_hir.hpp"
#include "support.hpp"
#include "wattlens/errors.hpp"
#include "wattlens/hir.hpp"

using namespace wattlens;
using namespace wattlens::hir;
using namespace wattlens::testing;

namespace {

HirProgram hir_fixture(const std::string& name) { return load_hir(fixture("hir/" + name)); }

Trace simulate(const Compiled& c, const Inputs& in) {
  Trace t = run(c.program, in);
  REQUIRE(t.outcome == Outcome::halted);
  return t;
}

Energy eir_wcec(const Compiled& c, const EnergyModel& m) { return wcec(c.program, build_cfg(c.program), m).value; }

std::vector<const MapEntry*> entries_for(const MappingTable& t, int stmt) {
  std::vector<const MapEntry*> out;
  for (const auto& e : t.entries)
    if (e.stmt == stmt) out.push_back(&e);
  return out;
}

Opcode opcode_at(const Program& p, const MapEntry& e) {
  const Function& f = p.functions[static_cast<std::size_t>(p.function_index(e.function))];
  return f.blocks[static_cast<std::size_t>(f.block_index(e.block))].instructions[static_cast<std::size_t>(e.index)].op;
}

}  // namespace

TEST_CASE("parser accepts the fixtures and numbers statements") {
  HirProgram p = hir_fixture("matmul.hir");
  REQUIRE(p.arrays.size() == 3);
  CHECK(p.array("B")->base == 400);
  CHECK(p.array("T")->base == 800);
  CHECK(p.stmt_count == 9);
  CHECK(p.functions[0].glue_id == 10);
  for (const char* f : {"straight.hir", "sumrec.hir", "search.hir", "guarded.hir"}) CHECK_NOTHROW(hir_fixture(f));
}

TEST_CASE("parser and checker report positions") {
  auto line_of = [](const std::string& text) {
    try {
      parse_hir(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(line_of("fn main() {\n  var x = ;\n}") == 2);
  CHECK(line_of("fn main() {\n  x = 1;\n}") == 2);
  CHECK(line_of("fn main() {\n  var x = 1;\n  var x = 2;\n}") == 3);
  CHECK_THROWS_AS(parse_hir("fn f() { return 1; }\n"), ParseError);
  CHECK(line_of("fn main() {\n  for i in 0..3 {\n    i = 2;\n  }\n}") == 3);
  CHECK(line_of("fn main() {\n  while 1 {\n  }\n}") == 2);
  CHECK(line_of("array A[2000];\nfn main() { }") == 1);
  CHECK(line_of("fn main(a: 5..1) { }") == 1);
  CHECK(line_of("fn main() { return g(1); }\nfn g(a: 0..1, b: 0..1) { return a; }") == 1);
}

TEST_CASE("interpreter semantics") {
  HirProgram p = parse_hir(
      "array A[4];\n"
      "fn main(a: 0..10) {\n"
      "  var x = 0 - 1;\n"
      "  A[0] = x * x;\n"
      "  A[1] = 1 << 33;\n"
      "  var c = 0;\n"
      "  if x < 0 { c = 1; }\n"
      "  for i in 0..a { A[2] = A[2] + i; }\n"
      "  A[3] = i;\n"
      "  return 3 + 2 * 4 ^ 1;\n"
      "}\n");
  Inputs in;
  in.registers[0] = 5;
  HirResult r = interpret(p, in);
  CHECK(r.memory[0] == 1u);
  CHECK(r.memory[1] == 2u);
  CHECK(r.memory[2] == 10u);
  CHECK(r.memory[3] == 5u);
  CHECK(r.value == ((3u + 8u) ^ 1u));
  in.registers[0] = 11;
  CHECK_THROWS_AS(interpret(p, in), SimulationError);

  HirProgram w = parse_hir("fn main(n: 0..10) {\n  var k = 0;\n  while k < n @bound 3 {\n    k = k + 1;\n  }\n  return k;\n}\n");
  in.registers[0] = 3;
  CHECK(interpret(w, in).value == 3u);
  in.registers[0] = 4;
  CHECK_THROWS_AS(interpret(w, in), SimulationError);

  HirProgram u = parse_hir("fn main(n: 0..1) {\n  if n { var y = 1; }\n  return y;\n}\n");
  in.registers[0] = 0;
  CHECK_THROWS_AS(interpret(u, in), SimulationError);
  in.registers[0] = 1;
  CHECK(interpret(u, in).value == 1u);
}

TEST_CASE("matmul compiles and agrees with the interpreter") {
  HirProgram p = hir_fixture("matmul.hir");
  Compiled c = compile(p);
  CHECK(check_mapping(c.program, c.mapping).empty());
  CHECK(validate_for_analysis(c.program, build_cfg(c.program)).empty());

  Inputs in;
  in.registers[0] = 3;
  int a[9] = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  int b[9] = {9, 8, 7, 6, 5, 4, 3, 2, 1};
  for (int k = 0; k < 9; ++k) {
    in.memory[k] = a[k];
    in.memory[400 + k] = b[k];
  }
  HirResult want = interpret(p, in);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      std::uint32_t s = 0;
      for (int k = 0; k < 3; ++k) s += static_cast<std::uint32_t>(a[i * 3 + k] * b[k * 3 + j]);
      CHECK(want.memory[static_cast<std::size_t>(i * 3 + j)] == s);
    }
  Trace t = simulate(c, in);
  CHECK(t.memory == want.memory);
  CHECK(t.registers[0] == want.value);

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 8; ++trial) {
    Inputs r;
    int n = static_cast<int>(rng() % 7);
    r.registers[0] = n;
    for (int k = 0; k < n * n; ++k) {
      r.memory[k] = static_cast<std::int64_t>(rng() % 100000);
      r.memory[400 + k] = static_cast<std::int64_t>(rng() % 100000);
    }
    CHECK(simulate(c, r).memory == interpret(p, r).memory);
  }
}

TEST_CASE("simple assignment maps to one instruction") {
  HirProgram p = hir_fixture("straight.hir");
  Compiled c = compile(p);
  CHECK(check_mapping(c.program, c.mapping).empty());
  auto first = entries_for(c.mapping, 1);
  REQUIRE(first.size() == 1);
  CHECK(opcode_at(c.program, *first[0]) == Opcode::ADD);
  CHECK(first[0]->part == Part::main);
  CHECK(entries_for(c.mapping, p.functions[0].glue_id).empty());

  EnergyModel m = varied_model();
  HirCosts costs = lift_model(m, c.program, c.mapping);
  CHECK(costs.stmt(1) == instruction_energy(m, Opcode::ADD, 1));
  CHECK(costs.stmt(2) == instruction_energy(m, Opcode::MUL, 1) * 2);  // two issue cycles
}

TEST_CASE("mapping covers every instruction; lifted costs add up") {
  EnergyModel m = varied_model();
  for (const char* f : {"matmul.hir", "straight.hir", "sumrec.hir", "search.hir", "guarded.hir"}) {
    CAPTURE(f);
    HirProgram p = hir_fixture(f);
    Compiled c = compile(p);
    CHECK(check_mapping(c.program, c.mapping).empty());
    std::size_t n = 0;
    for (const auto& fn : c.program.functions)
      for (const auto& b : fn.blocks) n += b.instructions.size();
    CHECK(c.mapping.entries.size() == n);

    HirCosts costs = lift_model(m, c.program, c.mapping);
    Energy lifted, direct;
    for (const auto& [key, e] : costs.parts) lifted += e;
    for (const auto& fn : c.program.functions)
      for (const auto& b : fn.blocks) direct += block_energy(m, b, 1);
    CHECK(lifted == direct);

    MappingTable broken = c.mapping;
    broken.entries.pop_back();
    CHECK_FALSE(check_mapping(c.program, broken).empty());
    broken = c.mapping;
    broken.entries.push_back(broken.entries.front());
    CHECK_FALSE(check_mapping(c.program, broken).empty());
  }
}

TEST_CASE("HIR bound equals the EIR bound when nothing is pruned") {
  EnergyModel m = varied_model();
  for (const char* f : {"matmul.hir", "straight.hir", "search.hir"}) {
    CAPTURE(f);
    HirProgram p = hir_fixture(f);
    Compiled c = compile(p);
    HirCosts costs = lift_model(m, c.program, c.mapping);
    CHECK(hir_wcec(p, costs).value == eir_wcec(c, m));
  }
}

TEST_CASE("straight-line bound is the sum of its statements") {
  EnergyModel m = varied_model();
  HirProgram p = hir_fixture("straight.hir");
  Compiled c = compile(p);
  HirCosts costs = lift_model(m, c.program, c.mapping);
  Energy sum = costs.stmt(1) + costs.stmt(2) + costs.stmt(3);
  CHECK(hir_wcec(p, costs).value == sum);
  Inputs in;
  in.registers[0] = 4;
  in.registers[1] = 9;
  Trace t = simulate(c, in);
  CHECK(trace_energy(m, c.program, t).total == sum);
  CHECK(t.registers[0] == interpret(p, in).value);
}

TEST_CASE("interval pruning makes the HIR bound tighter") {
  EnergyModel m = varied_model();
  HirProgram p = hir_fixture("guarded.hir");
  Compiled c = compile(p);
  HirCosts costs = lift_model(m, c.program, c.mapping);
  Energy hb = hir_wcec(p, costs).value;
  Energy eb = eir_wcec(c, m);
  CHECK(hb < eb);

  // Hand bound: every iteration takes the then arm; the worst case is n = 8.
  const int for_id = 2, if_id = 3, add_id = 4, ret_id = 8;
  Energy iter = costs.part(if_id, Part::main) + costs.stmt(add_id) + costs.part(for_id, Part::iteration);
  Energy hand = costs.stmt(1) + costs.part(for_id, Part::entry) + 8 * iter + costs.stmt(ret_id);
  CHECK(hb == hand);

  Inputs in;
  in.registers[0] = 8;
  for (int k = 0; k < 8; ++k) in.memory[k] = k * 3;
  Trace t = simulate(c, in);
  CHECK(trace_energy(m, c.program, t).total == hb);
  CHECK(t.registers[0] == interpret(p, in).value);
}

TEST_CASE("recursion runs but has no static bound") {
  HirProgram p = hir_fixture("sumrec.hir");
  Compiled c = compile(p);
  Inputs in;
  in.registers[0] = 10;
  CHECK(interpret(p, in).value == 55u);
  CHECK(simulate(c, in).registers[0] == 55u);
  HirCosts costs = lift_model(varied_model(), c.program, c.mapping);
  CHECK_THROWS_AS(hir_wcec(p, costs), AnalysisError);
  CHECK_THROWS_AS(eir_wcec(c, varied_model()), AnalysisError);
}

TEST_CASE("unsupported programs are rejected") {
  CHECK_THROWS_AS(compile(parse_hir("array A[4];\nfn main(n: 0..3) {\n  for i in 0..A[n] { }\n  return 0;\n}\n")),
                  UnsupportedError);
  std::string many = "fn main() {\n";
  for (int k = 0; k < 13; ++k) many += "  var x" + std::to_string(k) + " = " + std::to_string(k) + ";\n";
  many += "  return x0;\n}\n";
  CHECK_THROWS_AS(compile(parse_hir(many)), UnsupportedError);
}

TEST_CASE("constant folding removes dead code") {
  HirProgram p = parse_hir(
      "fn main(a: 0..9) {\n"
      "  var x = 2 * 3 + 1;\n"
      "  if 1 < 2 { x = x + a; } else { x = x * a; }\n"
      "  for i in 0..0 { x = 0; }\n"
      "  while 0 @bound 5 { x = 1; }\n"
      "  return x;\n"
      "}\n");
  Compiled c = compile(p);
  CHECK(check_mapping(c.program, c.mapping).empty());
  auto x = entries_for(c.mapping, 1);
  REQUIRE(x.size() == 1);
  CHECK(opcode_at(c.program, *x[0]) == Opcode::LDC);
  CHECK(entries_for(c.mapping, 4).empty());  // else arm
  CHECK(entries_for(c.mapping, 6).empty());  // body of the empty loop
  CHECK(entries_for(c.mapping, 7).empty());
  CHECK(c.program.functions[0].blocks.size() == 1);
  Inputs in;
  in.registers[0] = 4;
  CHECK(simulate(c, in).registers[0] == 11u);
}

TEST_CASE("interval helpers") {
  IntervalEnv env{{"n", {1, 8}}};
  Expr n;
  n.kind = Expr::Kind::var;
  n.name = "n";
  Expr two;
  two.value = 2;
  Expr prod;
  prod.kind = Expr::Kind::binary;
  prod.op = BinOp::mul;
  prod.args = {n, two};
  auto iv = eval_interval(prod, env);
  REQUIRE(iv);
  CHECK(iv->lo == 2);
  CHECK(iv->hi == 16);
  Cond c{RelOp::lt, n, two};
  CHECK_FALSE(decide(c, env).has_value());
  Expr nine;
  nine.value = 9;
  CHECK(decide(Cond{RelOp::lt, n, nine}, env) == std::optional(true));
  CHECK(decide(Cond{RelOp::ge, n, nine}, env) == std::optional(false));
  CHECK(decide(Cond{RelOp::eq, n, nine}, env) == std::optional(false));
  CHECK(decide(Cond{RelOp::nz, n, {}}, env) == std::optional(true));
  Expr big;
  big.value = 0x80000000u;
  CHECK_FALSE(eval_interval(big, env).has_value());

  HirProgram p = hir_fixture("matmul.hir");
  const Stmt& outer = p.functions[0].body[0];
  IntervalEnv e0 = entry_env(p.functions[0]);
  auto tr = trip_range(outer, e0);
  REQUIRE(tr);
  CHECK(tr->lo == 0);
  CHECK(tr->hi == 20);
  CHECK(body_env(outer, e0).at("i").hi == 19);
}

TEST_CASE("random programs: interpreter, simulator and bounds agree") {
  std::mt19937_64 rng(2024);
  EnergyModel m = varied_model();
  int compiled = 0, runs = 0;
  for (int trial = 0; trial < 300; ++trial) {
    RandomHir gen(rng);
    std::string text = gen.program();
    CAPTURE(text);
    HirProgram p = parse_hir(text);
    Compiled c;
    try {
      c = compile(p);
    } catch (const UnsupportedError&) {
      continue;  // register pressure
    }
    ++compiled;
    REQUIRE(check_mapping(c.program, c.mapping).empty());
    REQUIRE(validate_for_analysis(c.program, build_cfg(c.program)).empty());
    HirCosts costs = lift_model(m, c.program, c.mapping);
    Energy hb = hir_wcec(p, costs).value;
    Energy eb = eir_wcec(c, m);
    CHECK(hb <= eb);
    for (int k = 0; k < 4; ++k) {
      Inputs in;
      in.registers[0] = static_cast<std::int64_t>(rng() % 10);
      in.registers[1] = static_cast<std::int64_t>(rng() % 1001);
      for (int a = 0; a < 64; ++a) in.memory[a] = static_cast<std::int64_t>(rng() % 50);
      HirResult want = interpret(p, in);
      Trace t = simulate(c, in);
      CHECK(t.registers[0] == want.value);
      CHECK(t.memory == want.memory);
      CHECK(trace_energy(m, c.program, t).total <= hb);
      ++runs;
    }
  }
  CHECK(compiled >= 200);
  MESSAGE(compiled << " programs compiled, " << runs << " runs");
}

TEST_CASE("fixture programs: interpreter, simulator and bounds agree") {
  std::mt19937_64 rng(77);
  EnergyModel m = varied_model();
  int files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(fixture("hir"))) {
    std::string name = entry.path().filename().string();
    if (name == "sumrec.hir") continue;  // recursion has no structural bound
    CAPTURE(name);
    HirProgram p = hir_fixture(name);
    Compiled c = compile(p);
    REQUIRE(check_mapping(c.program, c.mapping).empty());
    Energy hb = hir_wcec(p, lift_model(m, c.program, c.mapping)).value;
    CHECK(hb <= eir_wcec(c, m));
    const HirFunction& main = *p.find("main");
    for (int k = 0; k < 25; ++k) {
      Inputs in;
      for (std::size_t i = 0; i < main.params.size(); ++i)
        in.registers[static_cast<int>(i)] =
            std::uniform_int_distribution<std::int64_t>(main.params[i].lo, main.params[i].hi)(rng);
      for (const auto& a : p.arrays)
        for (int w = 0; w < a.size; ++w) in.memory[a.base + w] = static_cast<std::int64_t>(rng() % 32);
      HirResult want = interpret(p, in);
      Trace t = simulate(c, in);
      CHECK(t.registers[0] == want.value);
      CHECK(t.memory == want.memory);
      CHECK(trace_energy(m, c.program, t).total <= hb);
    }
    ++files;
  }
  CHECK(files >= 20);
}
