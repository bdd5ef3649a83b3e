#include <random>
#include <set>

#include "doctest.h"
#include "random_programs.hpp"
#include "support.hpp"
#include "wattlens/errors.hpp"
#include "wattlens/machine.hpp"

using namespace wattlens;
using namespace wattlens::testing;

namespace {

// a dominates b iff b is unreachable from the entry once a is removed.
bool brute_dominates(const FunctionCfg& g, int a, int b) {
  if (a == b) return true;
  const int n = static_cast<int>(g.succ.size());
  std::vector<bool> seen(n, false);
  std::vector<int> work;
  if (a != 0) {
    seen[0] = true;
    work.push_back(0);
  }
  while (!work.empty()) {
    int x = work.back();
    work.pop_back();
    for (int s : g.succ[x])
      if (s != a && !seen[s]) {
        seen[s] = true;
        work.push_back(s);
      }
  }
  return !seen[b];
}

}  // namespace

TEST_CASE("one-function program") {
  Program p = parse_program("f:\n  LDC r0, 1\n  RET\n");
  REQUIRE(p.functions.size() == 1);
  CHECK(p.entry == "f");
  REQUIRE(p.functions[0].blocks.size() == 1);
  CHECK(p.functions[0].blocks[0].instructions.size() == 2);
  CHECK(p.functions[0].blocks[0].terminator() == Terminator::ret);
}

TEST_CASE("parse errors") {
  SUBCASE("undefined label is named") {
    try {
      parse_program("func main\n  BRT r0, nowhere\n  HALT\n");
      FAIL("expected parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("nowhere") != std::string::npos);
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("unknown opcode has line and column") {
    try {
      parse_program("func main\n  LDC r0, 1\n    FROB r1\n  HALT\n");
      FAIL("expected parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(e.column() == 5);
    }
  }
  SUBCASE("arity") { CHECK_THROWS_AS(parse_program("func main\n  ADD r0, r1\n  HALT\n"), ParseError); }
  SUBCASE("bad register") { CHECK_THROWS_AS(parse_program("func main\n  LDC r12, 1\n  HALT\n"), ParseError); }
  SUBCASE("bound before non-branch") {
    CHECK_THROWS_AS(parse_program("func main\n  @bound 3\n  LDC r0, 1\n  HALT\n"), ParseError);
  }
  SUBCASE("falls off the end") { CHECK_THROWS_AS(parse_program("func main\n  LDC r0, 1\n"), ParseError); }
  SUBCASE("unknown call target") { CHECK_THROWS_AS(parse_program("func main\n  CALL g, r0\n  HALT\n"), ParseError); }
}

TEST_CASE("fib fixture") {
  Program p = load_program(fixture("fib.eir"));
  CHECK(p.functions.size() == 2);
  CHECK(p.entry == "main");
  REQUIRE(p.inputs.size() == 1);
  CHECK(p.inputs[0].name() == "r0");
  CHECK(p.inputs[0].hi == 20);
  const Function& fib = p.functions[1];
  int body = fib.block_index("body");
  REQUIRE(body >= 0);
  CHECK(fib.loop_bounds.at(body).hi == 20);
  Cfg cfg = build_cfg(p);
  CHECK(cfg.functions[1].loops.size() == 1);
  CHECK(validate_for_analysis(p, cfg).empty());
}

TEST_CASE("straight-line function has a single node and no loops") {
  Program p = load_program(fixture("straight.eir"));
  Cfg cfg = build_cfg(p);
  CHECK(p.functions[0].blocks.size() == 1);
  CHECK(cfg.functions[0].loops.empty());
  CHECK(cfg.functions[0].reducible);
}

TEST_CASE("while loop lowering") {
  Program p = load_program(fixture("countdown.eir"));
  const Function& f = p.functions[0];
  FunctionCfg g = build_function_cfg(f);
  REQUIRE(g.loops.size() == 1);
  int head = f.block_index("head"), body = f.block_index("body");
  CHECK(g.loops[0].header == head);
  REQUIRE(g.loops[0].back_edges.size() == 1);
  CHECK(g.loops[0].back_edges[0] == std::pair{body, head});
  CHECK(g.dominates(head, body));
  CHECK(g.loops[0].blocks == std::vector<int>{head, body});
}

TEST_CASE("nested loops form a depth-2 forest") {
  Program p = load_program(fixture("nested.eir"));
  const Function& f = p.functions[0];
  FunctionCfg g = build_function_cfg(f);
  REQUIRE(g.loops.size() == 2);
  const Loop& outer = g.loops[0];
  const Loop& inner = g.loops[1];
  CHECK(outer.header == f.block_index("outer"));
  CHECK(inner.header == f.block_index("inner"));
  CHECK(inner.parent == 0);
  CHECK(inner.depth == 2);
  CHECK(outer.depth == 1);
  // hand-drawn CFG: inner's exit jump belongs to the outer loop, outer's exit jump to neither
  std::vector<int> expected_outer = {f.block_index("outer"), f.block_index("outer_body"), f.block_index("inner"),
                                     f.block_index("inner") + 1, f.block_index("inner_body"),
                                     f.block_index("inner_exit")};
  std::sort(expected_outer.begin(), expected_outer.end());
  CHECK(outer.blocks == expected_outer);
  CHECK(inner.blocks == std::vector<int>{f.block_index("inner"), f.block_index("inner_body")});
  CHECK(g.innermost_loop[f.block_index("inner_body")] == 1);
  CHECK(g.innermost_loop[f.block_index("inner_exit")] == 0);
  CHECK(g.innermost_loop[f.block_index("exit")] == -1);
}

TEST_CASE("validate_for_analysis diagnostics") {
  SUBCASE("missing bound") {
    Program p = parse_program("func main r0\nloop:\n  SUB r0, r0, r1\n  BRT r0, loop\n  HALT\n");
    auto d = validate_for_analysis(p, build_cfg(p));
    REQUIRE(d.size() == 1);
    CHECK(d[0].find("missing @bound") != std::string::npos);
  }
  SUBCASE("irreducible") {
    Program p = load_program(fixture("irreducible.eir"));
    Cfg cfg = build_cfg(p);
    CHECK_FALSE(cfg.functions[0].reducible);
    auto d = validate_for_analysis(p, cfg);
    REQUIRE(!d.empty());
    CHECK(d[0].find("irreducible") != std::string::npos);
  }
  SUBCASE("fully annotated reducible program") {
    Program p = load_program(fixture("nested.eir"));
    CHECK(validate_for_analysis(p, build_cfg(p)).empty());
  }
}

TEST_CASE("dominators match the brute-force definition on random CFGs") {
  std::mt19937_64 rng(2024);
  int irreducible = 0;
  for (int iter = 0; iter < 400; ++iter) {
    int n = 1 + static_cast<int>(rng() % 12);
    Program p = parse_program(random_cfg_program(rng, n));
    FunctionCfg g = build_function_cfg(p.functions[0]);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        if (!g.reachable[b]) continue;
        CHECK_MESSAGE(g.dominates(a, b) == brute_dominates(g, a, b), "a=" << a << " b=" << b);
      }
    if (!g.reducible) ++irreducible;
    // loop invariants: header dominates every block of its loop; nesting is proper
    for (const Loop& L : g.loops) {
      for (int b : L.blocks) CHECK(g.dominates(L.header, b));
      if (L.parent >= 0) {
        const Loop& P = g.loops[static_cast<std::size_t>(L.parent)];
        for (int b : L.blocks) CHECK(std::binary_search(P.blocks.begin(), P.blocks.end(), b));
      }
    }
  }
  CHECK(irreducible > 0);  // the generator does exercise the flag
}

TEST_CASE("print/parse round trip") {
  std::mt19937_64 rng(99);
  std::vector<std::string> texts;
  for (const char* f : {"fib.eir", "nested.eir", "irreducible.eir", "chan2.eir", "ifelse.eir", "countdown.eir",
                        "straight.eir"})
    texts.push_back(read_file(fixture(f)));
  for (int i = 0; i < 100; ++i) texts.push_back(random_cfg_program(rng, 1 + static_cast<int>(rng() % 10)));
  for (int i = 0; i < 50; ++i) texts.push_back(random_terminating_program(rng, i % 2 == 0));
  for (const auto& t : texts) {
    Program a = parse_program(t);
    std::string printed = print_program(a);
    Program b = parse_program(printed);
    CHECK(a == b);
    CHECK(print_program(b) == printed);
  }
}
