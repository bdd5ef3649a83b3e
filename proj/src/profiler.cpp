#include "wattlens/profiler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <tuple>

#include "wattlens/errors.hpp"

namespace wattlens {

namespace {

void require_profileable(Opcode op) {
  if (!is_profileable(isa_spec(op).cls))
    throw ValidationError("opcode", std::string(opcode_name(op)) + " is unprofileable");
}

std::string body_line(Opcode op) {
  std::string name(opcode_name(op));
  switch (op) {
    case Opcode::LDC: return "  LDC r2, 1431655765\n";
    case Opcode::LDW: return "  LDW r2, r1\n";
    case Opcode::STW: return "  STW r0, r1\n";
    default: return "  " + name + " r2, r0, r1\n";
  }
}

int slots(Opcode op) { return isa_spec(op).issue_cycles; }

// Cycles of one thread's loop iteration.
std::int64_t iteration_cycles(Opcode a, Opcode b, int unroll) {
  std::int64_t n = 1;
  for (int k = 0; k < unroll; ++k) n += slots(k % 2 == 0 ? a : b);
  return n;
}

std::int64_t window(std::int64_t period, std::int64_t target) { return period * ((target + period - 1) / period); }

}  // namespace

Program generate_pair_kernel(Opcode a, Opcode b, int n_threads, std::uint64_t seed, int unroll) {
  require_profileable(a);
  require_profileable(b);
  if (n_threads < 1) throw ValidationError("n_threads", "n_threads must be >= 1");
  if (unroll < 2 || unroll % 2 != 0) throw ValidationError("unroll", "unroll must be even and >= 2");
  if (opcode_name(b) < opcode_name(a)) std::swap(a, b);
  std::mt19937_64 rng(seed);
  std::ostringstream s;
  s << "func main\n";
  s << "  LDC r0, " << (rng() & 0x7fffffffu) << "\n";
  s << "  LDC r1, " << (rng() % kMemoryWords) << "\n";
  for (int t = 1; t < n_threads; ++t) s << "  FORK kern, r0\n";
  s << "  CALL kern, r0\n  HALT\n";
  s << "func kern r0 r1\nloop:\n";
  for (int k = 0; k < unroll; ++k) s << body_line(k % 2 == 0 ? a : b);
  s << "  JMP loop\n";
  return parse_program(s.str());
}

Program generate_kernel(Opcode op, int n_threads, std::uint64_t seed, int unroll) {
  return generate_pair_kernel(op, op, n_threads, seed, unroll);
}

Program idle_kernel() { return parse_program("func main\n  IN r0, 0\n  HALT\n"); }

double measure_kernel(const DeviceGroundTruth& dev, Opcode a, Opcode b, int n_threads, int unroll,
                      const ProfileConfig& cfg, OperandRegime regime) {
  Program k = generate_pair_kernel(a, b, n_threads, cfg.kernel_seed, unroll);
  std::int64_t period = iteration_cycles(a, b, unroll) * n_threads;
  MeasureOptions mo;
  mo.warmup = cfg.warmup;
  mo.regime = regime;
  return measure_average_power(dev, k, window(period, cfg.target_cycles), mo);
}

namespace {

// Per data slot power with the jump's share removed: with S data slots and
// one jump per iteration, (S + 1) * mean = S * x + const.
double steady(const DeviceGroundTruth& dev, Opcode a, Opcode b, int n_threads, const ProfileConfig& cfg,
              OperandRegime regime) {
  if (cfg.long_unroll <= cfg.short_unroll) throw ValidationError("long_unroll", "long_unroll must exceed short_unroll");
  double s1 = static_cast<double>(iteration_cycles(a, b, cfg.short_unroll) - 1);
  double s2 = static_cast<double>(iteration_cycles(a, b, cfg.long_unroll) - 1);
  double m1 = measure_kernel(dev, a, b, n_threads, cfg.short_unroll, cfg, regime);
  double m2 = measure_kernel(dev, a, b, n_threads, cfg.long_unroll, cfg, regime);
  return ((s2 + 1.0) * m2 - (s1 + 1.0) * m1) / (s2 - s1);
}

}  // namespace

double measure_steady_power(const DeviceGroundTruth& dev, Opcode op, int n_threads, const ProfileConfig& cfg,
                            OperandRegime regime) {
  return steady(dev, op, op, n_threads, cfg, regime);
}

EnergyModel fit_model(const DeviceGroundTruth& dev, const std::map<Opcode, InstructionSpec>& isa_meta,
                      const ProfileConfig& cfg) {
  std::vector<Opcode> ops;
  for (const auto& [op, spec] : isa_meta)
    if (is_profileable(spec.cls)) ops.push_back(op);
  if (ops.empty()) throw ValidationError("isa_meta", "no profileable opcode");
  for (Opcode op : ops)
    if (!dev.true_p.contains(op))
      throw Error("measurement failed: device does not execute " + std::string(opcode_name(op)));

  MeasureOptions idle;
  idle.warmup = cfg.warmup;
  const double p_b = measure_average_power(dev, idle_kernel(), cfg.target_cycles, idle);

  std::map<Opcode, double> y;  // O * P_i
  for (Opcode op : ops) y[op] = steady(dev, op, op, 1, cfg, OperandRegime::random) - p_b;

  // A pair kernel exceeds the slot-weighted mean of its parts by
  // (O - 1) |P_a - P_b| per transition, which is g |y_a - y_b| with
  // g = (O - 1) / O.
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ops.size(); ++i)
    for (std::size_t j = i + 1; j < ops.size(); ++j) {
      Opcode a = ops[i], b = ops[j];
      double sa = slots(a), sb = slots(b);
      double z = steady(dev, a, b, 1, cfg, OperandRegime::random) - p_b - (sa * y[a] + sb * y[b]) / (sa + sb);
      double u = 2.0 * std::abs(y[a] - y[b]) / (sa + sb);
      num += z * u;
      den += u * u;
    }
  double scale = 0.0;
  for (const auto& [op, v] : y) scale = std::max(scale, std::abs(v));
  if (den <= 1e-12 * std::max(1.0, scale * scale))
    throw Error("singular fit: profiling kernels do not separate the overhead");
  const double g = num / den;
  if (!(g < 1.0)) throw Error("overhead fit diverged");
  const double o = 1.0 / (1.0 - g);

  EnergyModel m;
  m.t_clk_ns = dev.t_clk_ns;
  m.p_b_mw = p_b;
  m.overhead = o;
  m.t_max = dev.t_max;
  Opcode ref = y.contains(cfg.reference) ? cfg.reference : ops.front();
  m.m_t.push_back(1.0);
  for (int t = 2; t <= dev.t_max; ++t) m.m_t.push_back((steady(dev, ref, ref, t, cfg, OperandRegime::random) - p_b) / y[ref]);
  for (Opcode op : ops) m.power[op] = {y[op] / o, PowerSource::profiled};
  m.isa_meta = isa_meta;
  for (const auto& [op, spec] : isa_meta)
    if (!m.power.contains(op)) m.power[op] = estimate_unprofiled(m, spec);
  validate(m);
  return m;
}

InstructionPower estimate_unprofiled(const EnergyModel& model, const InstructionSpec& spec) {
  using Key = std::tuple<int, int, int, int, std::string>;
  std::optional<Key> best;
  double power = 0.0;
  for (const auto& [op, p] : model.power) {
    if (p.source != PowerSource::profiled) continue;
    const InstructionSpec& s = model.isa_meta.at(op);
    Key k{s.cls != spec.cls, s.mem_access != spec.mem_access, std::abs(s.encoding_bits - spec.encoding_bits),
          std::abs(s.operand_count - spec.operand_count), s.opcode};
    if (!best || k < *best) {
      best = k;
      power = p.power_mw;
    }
  }
  if (!best) throw ValidationError("power", "no profiled opcode to estimate from");
  return {power, PowerSource::estimated};
}

Heatmap pairwise_heatmap(const DeviceGroundTruth& dev, const std::vector<Opcode>& opcodes, int n_threads,
                         const ProfileConfig& cfg) {
  for (Opcode op : opcodes) require_profileable(op);
  Heatmap h;
  h.opcodes = opcodes;
  h.mw.assign(opcodes.size(), std::vector<double>(opcodes.size(), 0.0));
  for (std::size_t i = 0; i < opcodes.size(); ++i)
    for (std::size_t j = i; j < opcodes.size(); ++j) {
      double v = measure_kernel(dev, opcodes[i], opcodes[j], n_threads, cfg.long_unroll, cfg);
      h.mw[i][j] = h.mw[j][i] = v;
    }
  return h;
}

std::string heatmap_csv(const Heatmap& h) {
  std::string out = "opcode";
  for (Opcode op : h.opcodes) out += "," + std::string(opcode_name(op));
  out += "\n";
  char buf[32];
  for (std::size_t i = 0; i < h.opcodes.size(); ++i) {
    out += opcode_name(h.opcodes[i]);
    for (double v : h.mw[i]) {
      std::snprintf(buf, sizeof buf, ",%.4f", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace wattlens
