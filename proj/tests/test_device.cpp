#include <bit>
#include <random>

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

}  // namespace

TEST_CASE("true_power endpoints") {
  DeviceGroundTruth d = default_device();
  d.data_coeff[Opcode::ADD] = 0.2;
  std::vector<std::uint32_t> a{0x12345678u, 0x0f0f0f0fu};
  std::vector<std::uint32_t> inv{~a[0], ~a[1]};
  CHECK(true_power(d, Opcode::ADD, a, a) == doctest::Approx(50.0 * 0.8));
  CHECK(true_power(d, Opcode::ADD, a, inv) == doctest::Approx(50.0 * 1.2));
  std::vector<std::uint32_t> none;
  CHECK(true_power(d, Opcode::JMP, none, none) == 45.0);
  d.true_p.erase(Opcode::SHL);
  CHECK_THROWS_AS(true_power(d, Opcode::SHL, a, a), ValidationError);
}

TEST_CASE("random operands average to the base power") {
  DeviceGroundTruth d = default_device();
  std::mt19937_64 rng(11);
  for (Opcode op : {Opcode::ADD, Opcode::LDW, Opcode::STW}) {
    d.data_coeff[op] = 0.25;
    int n = data_words(op);
    std::vector<std::uint32_t> prev(n), cur(n);
    double sum = 0.0;
    const int samples = 100'000;
    for (int s = 0; s < samples; ++s) {
      for (auto& w : cur) w = static_cast<std::uint32_t>(rng());
      sum += true_power(d, op, prev, cur);
      prev = cur;
    }
    CHECK(std::abs(sum / samples / d.true_p[op] - 1.0) < 0.005);
  }
}

TEST_CASE("measurement of an LDC loop without data sensitivity") {
  DeviceGroundTruth d = noiseless();
  const int unroll = 16;
  Program k = generate_kernel(Opcode::LDC, 1, 3, unroll);
  // one period: 16 LDC slots and a JMP, with two LDC/JMP transitions
  double o = d.overhead, pl = d.true_p[Opcode::LDC], pj = d.true_p[Opcode::JMP];
  double period = (unroll + 1) * d.p_b_mw + unroll * o * pl + o * pj + 2 * (o - 1) * std::abs(pl - pj);
  double expected = period / (unroll + 1);
  MeasureOptions mo;
  mo.warmup = 100;
  double got = measure_average_power(d, k, 17 * 500, mo);
  CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  CHECK(measure_average_power(d, k, 17 * 500, mo) == got);
}

TEST_CASE("random data dissipates more than constrained data") {
  DeviceGroundTruth d = default_device();
  d.data_coeff[Opcode::ADD] = 0.25;
  Program k = generate_kernel(Opcode::ADD, 1, 3, 64);
  MeasureOptions random_mo, fixed_mo;
  fixed_mo.regime = OperandRegime::constrained;
  double r = measure_average_power(d, k, 65 * 2000, random_mo);
  double c = measure_average_power(d, k, 65 * 2000, fixed_mo);
  double truth = measure_average_power(noiseless(), k, 65 * 2000, random_mo);
  CHECK(r >= 0.75 * truth);
  CHECK(r <= 1.25 * truth);
  CHECK(r > c);
  // the spread between regimes stays inside the configured envelope
  CHECK((r - c) / truth < 0.25);
  CHECK((r - c) / truth > 0.05 * 0.5);
  CHECK(measure_average_power(d, k, 65 * 2000, random_mo) == r);
}

TEST_CASE("blocked and halting kernels") {
  DeviceGroundTruth d = default_device();
  CHECK(measure_average_power(d, idle_kernel(), 5000) == doctest::Approx(d.p_b_mw).epsilon(1e-12));
  Program halts = parse_program("func main\n  LDC r0, 1\n  HALT\n");
  CHECK_THROWS_AS(measure_average_power(d, halts, 100), SimulationError);
}

TEST_CASE("multi-threaded kernels are scaled by M_t") {
  DeviceGroundTruth d = noiseless();
  d.overhead = 1.0;  // no transition term
  d.true_p[Opcode::JMP] = d.true_p[Opcode::ADD];
  Program k = generate_kernel(Opcode::ADD, 3, 3, 16);
  MeasureOptions mo;
  mo.warmup = 500;
  double expected = d.p_b_mw + d.m_t[2] * d.true_p[Opcode::ADD];
  CHECK(measure_average_power(d, k, 3 * 17 * 100, mo) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("device file round-trip and validation") {
  DeviceGroundTruth d = default_device();
  std::string text = serialize_device(d);
  DeviceGroundTruth back = parse_device(text);
  CHECK(serialize_device(back) == text);
  CHECK(back.true_p == d.true_p);
  CHECK(back.data_coeff == d.data_coeff);
  for (const auto& [op, c] : d.data_coeff) {
    CHECK(c >= 0.05);
    CHECK(c <= 0.25);
  }
  d.data_coeff[Opcode::ADD] = 1.5;
  CHECK_THROWS_AS(validate(d), ValidationError);
  CHECK_THROWS_AS(parse_device("{"), ParseError);
  EnergyModel m = ground_truth_model(default_device());
  CHECK(m.power.size() == 17);
  CHECK(device_from_model(m).true_p == default_device().true_p);
}
