#include <cmath>
#include <numeric>

#include "doctest.h"
#include "wattlens/device.hpp"
#include "wattlens/errors.hpp"
#include "wattlens/profiler.hpp"

using namespace wattlens;

namespace {

DeviceGroundTruth noiseless() {
  DeviceGroundTruth d = default_device();
  for (auto& [op, c] : d.data_coeff) c = 0.0;
  return d;
}

std::map<Opcode, InstructionSpec> full_isa() {
  std::map<Opcode, InstructionSpec> m;
  for (Opcode op : all_opcodes()) m[op] = isa_spec(op);
  return m;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

void check_recovers(const EnergyModel& fit, const EnergyModel& truth, double tol) {
  CHECK(rel(fit.p_b_mw, truth.p_b_mw) < tol);
  CHECK(rel(fit.overhead, truth.overhead) < tol);
  REQUIRE(fit.m_t.size() == truth.m_t.size());
  for (std::size_t t = 0; t < fit.m_t.size(); ++t) CHECK(rel(fit.m_t[t], truth.m_t[t]) < tol);
  for (const auto& [op, p] : fit.power)
    if (p.source == PowerSource::profiled) CHECK(rel(p.power_mw, truth.power.at(op).power_mw) < tol);
}

}  // namespace

TEST_CASE("kernel generation") {
  Program one = generate_kernel(Opcode::ADD, 1);
  CHECK(one.functions.size() == 2);
  const Function& k = one.functions[1];
  CHECK(k.blocks.size() == 1);
  CHECK(k.blocks[0].instructions.size() == 17);
  CHECK(build_function_cfg(k).loops.size() == 1);

  Program four = generate_kernel(Opcode::ADD, 4);
  int forks = 0;
  for (const auto& i : four.functions[0].blocks[0].instructions) forks += i.op == Opcode::FORK;
  CHECK(forks == 3);
  CHECK(generate_pair_kernel(Opcode::SUB, Opcode::ADD, 2) == generate_pair_kernel(Opcode::ADD, Opcode::SUB, 2));

  CHECK_THROWS_WITH_AS(generate_kernel(Opcode::BRT, 1), doctest::Contains("unprofileable"), ValidationError);
  CHECK_THROWS_AS(generate_kernel(Opcode::OUT, 1), ValidationError);
}

TEST_CASE("noiseless device is recovered within 0.1%") {
  DeviceGroundTruth d = noiseless();
  EnergyModel fit = fit_model(d, full_isa());
  check_recovers(fit, ground_truth_model(d), 1e-3);
  for (const auto& [op, p] : fit.power)
    CHECK((p.source == PowerSource::estimated) == !is_profileable(isa_spec(op).cls));
}

TEST_CASE("data-sensitive device") {
  DeviceGroundTruth d = default_device();
  ProfileConfig cfg;
  EnergyModel fit = fit_model(d, full_isa(), cfg);
  for (const auto& [op, p] : fit.power) {
    if (p.source != PowerSource::profiled) continue;
    CAPTURE(opcode_name(op));
    // random operands average to true_p (Monte-Carlo checked in the device tests)
    CHECK(rel(p.power_mw, d.true_p.at(op)) < 0.02);
    double constrained = (measure_steady_power(d, op, 1, cfg, OperandRegime::constrained) - fit.p_b_mw) / fit.overhead;
    CHECK(p.power_mw >= constrained);
  }
  CHECK(rel(fit.overhead, d.overhead) < 0.02);
}

TEST_CASE("fit idempotence") {
  EnergyModel first = fit_model(noiseless(), full_isa());
  EnergyModel second = fit_model(device_from_model(first), full_isa());
  for (const auto& [op, p] : first.power) CHECK(rel(second.power.at(op).power_mw, p.power_mw) < 1e-3);
  check_recovers(second, first, 1e-3);
}

TEST_CASE("singular and empty fits") {
  DeviceGroundTruth d = noiseless();
  for (auto& [op, p] : d.true_p) p = 50.0;
  CHECK_THROWS_WITH_AS(fit_model(d, full_isa()), doctest::Contains("singular"), Error);
  std::map<Opcode, InstructionSpec> control{{Opcode::JMP, isa_spec(Opcode::JMP)}};
  CHECK_THROWS_AS(fit_model(d, control), ValidationError);
}

TEST_CASE("feature-nearest estimation") {
  EnergyModel m = ground_truth_model(default_device());
  CHECK(estimate_unprofiled(m, isa_spec(Opcode::ADD)).power_mw == 50.0);
  CHECK(estimate_unprofiled(m, isa_spec(Opcode::ADD)).source == PowerSource::estimated);

  // only the memory opcodes profiled: a 32-bit, 3-operand memory access
  // is nearest STW/LDW by width then arity; both tie, LDW sorts first
  EnergyModel mem = m;
  for (auto& [op, p] : mem.power)
    if (op != Opcode::LDW && op != Opcode::STW) p.source = PowerSource::estimated;
  InstructionSpec wide{"LDX", 3, 32, true, 1, InstrClass::mem};
  CHECK(estimate_unprofiled(mem, wide).power_mw == 63.0);
  CHECK(estimate_unprofiled(mem, isa_spec(Opcode::JMP)).power_mw == 63.0);

  SUBCASE("leave-one-out beats the mean") {
    std::vector<Opcode> profiled;
    for (Opcode op : all_opcodes())
      if (is_profileable(isa_spec(op).cls)) profiled.push_back(op);
    double err = 0.0, base = 0.0;
    double mean = 0.0;
    for (Opcode op : profiled) mean += m.power[op].power_mw;
    mean /= static_cast<double>(profiled.size());
    for (Opcode held : profiled) {
      EnergyModel loo = m;
      for (auto& [op, p] : loo.power) p.source = PowerSource::estimated;
      for (Opcode op : profiled)
        if (op != held) loo.power[op].source = PowerSource::profiled;
      err += std::abs(estimate_unprofiled(loo, isa_spec(held)).power_mw - m.power[held].power_mw);
      base += std::abs(mean - m.power[held].power_mw);
    }
    MESSAGE("leave-one-out MAE " << err / profiled.size() << " mW, mean baseline " << base / profiled.size() << " mW");
    CHECK(err < base);
  }
  EnergyModel none = m;
  for (auto& [op, p] : none.power) p.source = PowerSource::estimated;
  CHECK_THROWS_AS(estimate_unprofiled(none, isa_spec(Opcode::ADD)), ValidationError);
}

TEST_CASE("pairwise heat map") {
  DeviceGroundTruth d = default_device();
  ProfileConfig cfg;
  cfg.target_cycles = 20'000;
  std::vector<Opcode> arith;
  for (Opcode op : all_opcodes())
    if (isa_spec(op).cls == InstrClass::arith) arith.push_back(op);
  for (int threads : {1, 4}) {
    CAPTURE(threads);
    Heatmap h = pairwise_heatmap(d, arith, threads, cfg);
    for (std::size_t i = 0; i < arith.size(); ++i) {
      CHECK(h.mw[i][i] == measure_kernel(d, arith[i], arith[i], threads, cfg.long_unroll, cfg));
      for (std::size_t j = 0; j < arith.size(); ++j) CHECK(h.mw[i][j] == h.mw[j][i]);
    }
    // rows of three-operand opcodes dominate the two-operand row entrywise
    for (std::size_t hi = 0; hi < arith.size(); ++hi)
      for (std::size_t lo = 0; lo < arith.size(); ++lo) {
        if (isa_spec(arith[hi]).operand_count <= isa_spec(arith[lo]).operand_count) continue;
        for (std::size_t c = 0; c < arith.size(); ++c) CHECK(h.mw[hi][c] > h.mw[lo][c]);
      }
  }
  Heatmap small = pairwise_heatmap(d, {Opcode::ADD, Opcode::LDC}, 1, cfg);
  std::string csv = heatmap_csv(small);
  CHECK(csv.starts_with("opcode,ADD,LDC\nADD,"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK_THROWS_AS(pairwise_heatmap(d, {Opcode::JMP}, 1, cfg), ValidationError);
}
