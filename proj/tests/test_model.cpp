#include <random>

#include "doctest.h"
#include "support.hpp"
#include "wattlens/errors.hpp"
#include "wattlens/model.hpp"

using namespace wattlens;
using namespace wattlens::testing;

namespace {

EnergyModel example_model() {
  EnergyModel m = flat_model(10.0, 20.0, 1.2, {1.0, 0.8}, 0.0);
  m.power[Opcode::ADD].power_mw = 50.0;
  return m;
}

ExecutionStats random_stats(std::mt19937_64& rng, int t_max) {
  ExecutionStats s;
  std::uniform_int_distribution<int> op(0, kOpcodeCount - 1), t(1, t_max);
  std::uniform_int_distribution<std::int64_t> n(0, 5000);
  int entries = static_cast<int>(rng() % 12);
  for (int i = 0; i < entries; ++i) s.n_it[{static_cast<Opcode>(op(rng)), t(rng)}] += n(rng);
  s.n_idl = n(rng);
  s.total_cycles = s.n_idl + s.issued();
  return s;
}

}  // namespace

TEST_CASE("energy of empty stats is zero") {
  CHECK(energy(example_model(), ExecutionStats{}) == Energy{});
}

TEST_CASE("hand-substituted single-thread example") {
  ExecutionStats s;
  s.n_it[{Opcode::ADD, 1}] = 100;
  s.n_idl = 10;
  s.total_cycles = 110;
  // 20*10*10 + (1.0*50*1.2 + 20)*100*10 = 2000 + 80000
  CHECK(energy(example_model(), s).fj() == 82'000'000);
  CHECK(format_pj(energy(example_model(), s)) == "82000.000");
}

TEST_CASE("hand-substituted two-thread example") {
  ExecutionStats s;
  s.n_it[{Opcode::ADD, 2}] = 100;
  s.total_cycles = 100;
  // (0.8*50*1.2 + 20)*100*10
  CHECK(energy(example_model(), s).fj() == 68'000'000);
}

TEST_CASE("instruction_energy") {
  EnergyModel m = example_model();
  CHECK(instruction_energy(m, Opcode::ADD, 1).fj() == 800'000);
  // zero instruction power leaves only the base power
  m.power[Opcode::SUB].power_mw = 0.0;
  m.overhead = 7.5;
  CHECK(instruction_energy(m, Opcode::SUB, 1) == idle_energy(m));
  CHECK(idle_energy(m).fj() == 200'000);
  CHECK_THROWS_AS(instruction_energy(m, Opcode::ADD, 3), ValidationError);
  m.power.erase(Opcode::MUL);
  CHECK_THROWS_AS(instruction_energy(m, Opcode::MUL, 1), ValidationError);
}

TEST_CASE("energy: consistency, additivity and monotonicity on random stats") {
  EnergyModel m = varied_model();
  std::mt19937_64 rng(7);
  for (int iter = 0; iter < 300; ++iter) {
    ExecutionStats a = random_stats(rng, m.t_max), b = random_stats(rng, m.t_max);
    Energy sum = idle_energy(m) * a.n_idl;
    for (const auto& [key, n] : a.n_it) sum += instruction_energy(m, key.first, key.second) * n;
    CHECK(energy(m, a) == sum);
    CHECK(energy(m, a + b) == energy(m, a) + energy(m, b));
    ExecutionStats c = a;
    c.n_it[{Opcode::XOR, 1 + iter % m.t_max}] += 1 + iter;
    c.n_idl += iter % 3;
    CHECK(energy(m, c) >= energy(m, a));
  }
}

TEST_CASE("energy agrees with a real-valued evaluation to within rounding") {
  EnergyModel m = varied_model();
  m.t_clk_ns = 2.5;
  m.overhead = 1.137;
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 50; ++iter) {
    ExecutionStats s = random_stats(rng, m.t_max);
    long double ref = static_cast<long double>(m.p_b_mw) * s.n_idl * m.t_clk_ns;
    std::int64_t cycles = s.n_idl;
    for (const auto& [key, n] : s.n_it) {
      ref += (static_cast<long double>(m.scaling(key.second)) * m.power.at(key.first).power_mw * m.overhead + m.p_b_mw) *
             n * m.t_clk_ns;
      cycles += n;
    }
    // each cycle's unit is rounded to the nearest femtojoule
    CHECK(std::abs(static_cast<long double>(energy(m, s).fj()) - ref * 1000.0L) <= 0.5L * cycles + 1e-6L);
  }
}

TEST_CASE("model file round trip is byte exact") {
  EnergyModel m = varied_model();
  m.power[Opcode::JMP].source = PowerSource::estimated;
  m.overhead = 1.0 / 3.0;
  std::string text = serialize_model(m);
  EnergyModel back = parse_model(text);
  CHECK(back.power.size() == static_cast<std::size_t>(kOpcodeCount));
  CHECK(serialize_model(back) == text);
  CHECK(back.power.at(Opcode::JMP).source == PowerSource::estimated);
  CHECK(back.overhead == m.overhead);
}

TEST_CASE("model with a subset of opcodes") {
  EnergyModel m = varied_model();
  for (int i = 12; i < kOpcodeCount; ++i) {
    m.power.erase(static_cast<Opcode>(i));
    m.isa_meta.erase(static_cast<Opcode>(i));
  }
  EnergyModel back = parse_model(serialize_model(m));
  CHECK(back.power.size() == 12);
}

TEST_CASE("validation errors name the field") {
  std::string good = serialize_model(flat_model(10.0, 20.0, 1.2, {1.0, 0.9, 0.8, 0.7}, 40.0));
  auto mutate = [&](const std::string& from, const std::string& to) {
    std::string s = good;
    auto pos = s.find(from);
    REQUIRE(pos != std::string::npos);
    return s.replace(pos, from.size(), to);
  };
  SUBCASE("m_t gap") {
    try {
      parse_model(mutate("0.9,", "null,"));
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()) == "m_t gap at t=2");
      CHECK(e.field() == "m_t");
    }
  }
  SUBCASE("short m_t") {
    CHECK_THROWS_WITH_AS(parse_model(mutate("\"t_max\": 4", "\"t_max\": 5")), "m_t gap at t=5", ValidationError);
  }
  SUBCASE("zero clock") {
    try {
      parse_model(mutate("\"t_clk_ns\": 10.0", "\"t_clk_ns\": 0.0"));
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(e.field() == "t_clk_ns");
    }
  }
  SUBCASE("non-monotonic scaling") {
    CHECK_THROWS_AS(parse_model(mutate("0.8,", "0.95,")), ValidationError);
  }
  SUBCASE("bad operand count") {
    CHECK_THROWS_AS(parse_model(mutate("\"operand_count\": 2", "\"operand_count\": 4")), ValidationError);
  }
  SUBCASE("malformed json") { CHECK_THROWS_AS(parse_model(good.substr(0, good.size() / 2)), ParseError); }
  SUBCASE("missing field") { CHECK_THROWS_AS(parse_model(mutate("\"overhead\"", "\"overheed\"")), ParseError); }
}

TEST_CASE("scaling direction") {
  CHECK(flat_model(1, 1, 1, {1.0, 0.9}, 1).scaling_direction() == ScalingDirection::non_increasing);
  CHECK(flat_model(1, 1, 1, {1.0, 1.1}, 1).scaling_direction() == ScalingDirection::non_decreasing);
  CHECK(flat_model(1, 1, 1, {1.0}, 1).scaling_direction() == ScalingDirection::constant);
}

TEST_CASE("stats validation") {
  ExecutionStats s;
  s.n_it[{Opcode::ADD, 1}] = 3;
  s.n_idl = 2;
  s.total_cycles = 5;
  CHECK_NOTHROW(validate(s));
  s.total_cycles = 6;
  CHECK_THROWS_AS(validate(s), ValidationError);
}
