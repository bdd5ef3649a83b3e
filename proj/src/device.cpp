#include "wattlens/device.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "wattlens/errors.hpp"
#include "wattlens/simulator.hpp"

namespace wattlens {

using nlohmann::json;

DeviceGroundTruth default_device() {
  DeviceGroundTruth d;
  d.m_t = {1.0, 0.92, 0.87, 0.84};
  d.true_p = {
      {Opcode::LDC, 44.0},  {Opcode::ADD, 50.0},  {Opcode::SUB, 50.5}, {Opcode::MUL, 58.0},
      {Opcode::AND, 48.5},  {Opcode::XOR, 49.5},  {Opcode::SHL, 51.0}, {Opcode::LDW, 63.0},
      {Opcode::STW, 67.0},  {Opcode::BRT, 46.0},  {Opcode::JMP, 45.0}, {Opcode::CALL, 60.0},
      {Opcode::RET, 55.0},  {Opcode::FORK, 62.0}, {Opcode::OUT, 57.0}, {Opcode::IN, 56.0},
      {Opcode::HALT, 40.0},
  };
  const std::vector<double> deltas = {0.05, 0.08, 0.10, 0.12, 0.15, 0.18, 0.20, 0.22, 0.25};
  std::size_t k = 0;
  for (const auto& [op, p] : d.true_p) d.data_coeff[op] = deltas[k++ % deltas.size()];
  return d;
}

void validate(const DeviceGroundTruth& dev) {
  EnergyModel m = ground_truth_model(dev);
  validate(m);
  for (const auto& [op, p] : dev.true_p)
    if (!dev.data_coeff.contains(op))
      throw ValidationError("data_coeff", "missing data_coeff for " + std::string(opcode_name(op)));
  for (const auto& [op, c] : dev.data_coeff) {
    if (!dev.true_p.contains(op))
      throw ValidationError("data_coeff", "data_coeff for unknown opcode " + std::string(opcode_name(op)));
    if (!(c >= 0.0 && c < 1.0))
      throw ValidationError("data_coeff", "data_coeff for " + std::string(opcode_name(op)) + " outside [0, 1)");
  }
}

EnergyModel ground_truth_model(const DeviceGroundTruth& dev) {
  EnergyModel m;
  m.t_clk_ns = dev.t_clk_ns;
  m.p_b_mw = dev.p_b_mw;
  m.overhead = dev.overhead;
  m.t_max = dev.t_max;
  m.m_t = dev.m_t;
  for (const auto& [op, p] : dev.true_p) {
    m.power[op] = {p, PowerSource::profiled};
    m.isa_meta[op] = isa_spec(op);
  }
  return m;
}

DeviceGroundTruth device_from_model(const EnergyModel& model, double data_coeff, std::uint64_t seed) {
  DeviceGroundTruth d;
  d.t_clk_ns = model.t_clk_ns;
  d.p_b_mw = model.p_b_mw;
  d.overhead = model.overhead;
  d.t_max = model.t_max;
  d.m_t = model.m_t;
  d.seed = seed;
  for (const auto& [op, p] : model.power) {
    d.true_p[op] = p.power_mw;
    d.data_coeff[op] = data_coeff;
  }
  return d;
}

DeviceGroundTruth parse_device(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("device file: ") + e.what());
  }
  DeviceGroundTruth d;
  try {
    d.t_clk_ns = j.at("t_clk_ns").get<double>();
    d.p_b_mw = j.at("p_b_mw").get<double>();
    d.overhead = j.at("overhead").get<double>();
    d.t_max = j.at("t_max").get<int>();
    d.m_t = j.at("m_t").get<std::vector<double>>();
    d.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("instructions")) {
      std::string name = e.at("opcode").get<std::string>();
      auto op = opcode_from_name(name);
      if (!op) throw ValidationError("instructions", "unknown opcode " + name);
      d.true_p[*op] = e.at("power_mw").get<double>();
      d.data_coeff[*op] = e.at("data_coeff").get<double>();
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("device file: ") + e.what());
  }
  validate(d);
  return d;
}

DeviceGroundTruth load_device(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_device(ss.str());
}

std::string serialize_device(const DeviceGroundTruth& d) {
  nlohmann::ordered_json j;
  j["t_clk_ns"] = d.t_clk_ns;
  j["p_b_mw"] = d.p_b_mw;
  j["overhead"] = d.overhead;
  j["t_max"] = d.t_max;
  j["m_t"] = d.m_t;
  j["seed"] = d.seed;
  j["instructions"] = nlohmann::ordered_json::array();
  for (const auto& [op, p] : d.true_p) {
    nlohmann::ordered_json e;
    e["opcode"] = std::string(opcode_name(op));
    e["power_mw"] = p;
    e["data_coeff"] = d.data_coeff.at(op);
    j["instructions"].push_back(e);
  }
  return j.dump(2) + "\n";
}

int data_words(Opcode op) {
  switch (op) {
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::MUL:
    case Opcode::AND:
    case Opcode::XOR:
    case Opcode::SHL:
    case Opcode::STW: return 2;
    case Opcode::LDC:
    case Opcode::LDW:
    case Opcode::OUT:
    case Opcode::IN: return 1;
    default: return 0;
  }
}

double true_power(const DeviceGroundTruth& dev, Opcode op, std::span<const std::uint32_t> prev,
                  std::span<const std::uint32_t> operands) {
  auto it = dev.true_p.find(op);
  if (it == dev.true_p.end()) throw ValidationError("opcode", "device has no power for " + std::string(opcode_name(op)));
  if (prev.size() != operands.size()) throw ValidationError("operands", "operand word counts differ");
  if (operands.empty()) return it->second;
  int h = 0;
  for (std::size_t k = 0; k < operands.size(); ++k) h += std::popcount(prev[k] ^ operands[k]);
  double w = 32.0 * static_cast<double>(operands.size());
  return it->second * (1.0 + dev.data_coeff.at(op) * (2.0 * h / w - 1.0));
}

double measure_average_power(const DeviceGroundTruth& dev, const Program& kernel, std::int64_t duration,
                             const MeasureOptions& opt) {
  if (duration <= 0) throw ValidationError("duration", "duration must be > 0");
  if (opt.warmup < 0) throw ValidationError("warmup", "warmup must be >= 0");
  RunOptions ro;
  ro.fuel = opt.warmup + duration;
  ro.t_max = dev.t_max;
  Trace tr = run(kernel, {}, ro);
  if (tr.outcome == Outcome::halted) throw SimulationError("kernel halted after " + std::to_string(tr.cycles) + " cycles");
  const std::int64_t end = opt.warmup + duration;

  // Operand data comes from the device's own stream, not register contents,
  // so a tight loop still sees fresh random words on every issue.
  std::mt19937_64 rng(dev.seed);
  std::array<std::uint32_t, 2> bus{0, 0};
  std::array<std::uint32_t, 2> words{0, 0};
  std::map<int, std::pair<int, double>> pending;  // tid -> (slots left, data factor)
  bool have_prev = false;
  Opcode prev_op = Opcode::HALT;
  double sum = 0.0;
  std::int64_t next_cycle = 0;
  auto idle_until = [&](std::int64_t c) {
    std::int64_t lo = std::max(next_cycle, opt.warmup);
    if (c > lo) sum += dev.p_b_mw * static_cast<double>(c - lo);
    if (c > next_cycle) have_prev = false;
  };
  for (const TraceEvent& e : tr.events) {
    idle_until(e.cycle);
    auto& [left, factor] = pending[e.tid];
    if (left == 0) {
      left = isa_spec(e.op).issue_cycles;
      int n = data_words(e.op);
      for (int k = 0; k < n; ++k)
        words[k] = opt.regime == OperandRegime::random ? static_cast<std::uint32_t>(rng() >> 32)
                                                       : (k == 0 ? 0x5a5a5a5au : 0x3c3c3c3cu);
      double p = dev.true_p.at(e.op);
      double scaled = true_power(dev, e.op, std::span(bus.data(), n), std::span(words.data(), n));
      factor = p > 0.0 ? scaled / p : 1.0;
      for (int k = 0; k < n; ++k) bus[k] = words[k];
    }
    --left;
    double p_i = dev.true_p.at(e.op);
    double trans = have_prev ? std::abs(p_i - dev.true_p.at(prev_op)) : 0.0;
    double m = dev.m_t.at(static_cast<std::size_t>(e.active - 1));
    if (e.cycle >= opt.warmup)
      sum += dev.p_b_mw + m * (dev.overhead * p_i * factor + (dev.overhead - 1.0) * trans);
    prev_op = e.op;
    have_prev = true;
    next_cycle = e.cycle + 1;
  }
  idle_until(end);
  return sum / static_cast<double>(duration);
}

}  // namespace wattlens
