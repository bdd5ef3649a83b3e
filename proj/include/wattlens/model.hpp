#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "wattlens/energy.hpp"
#include "wattlens/isa.hpp"

namespace wattlens {

enum class PowerSource { profiled, estimated };

struct InstructionPower {
  double power_mw = 0.0;
  PowerSource source = PowerSource::profiled;
};

enum class ScalingDirection { constant, non_increasing, non_decreasing };

// Per-instruction energy model:
//
//   E = P_b * N_idl * T_clk + sum_t sum_i (M_t * P_i * O + P_b) * N_{i,t} * T_clk
//
// Powers are in mW, the clock period in ns, so products are in pJ. M_t and
// O are dimensionless.
struct EnergyModel {
  double t_clk_ns = 0.0;
  double p_b_mw = 0.0;
  double overhead = 1.0;
  int t_max = 1;
  std::vector<double> m_t;  // m_t[t - 1] for t = 1..t_max
  std::map<Opcode, InstructionPower> power;
  std::map<Opcode, InstructionSpec> isa_meta;

  double scaling(int t) const { return m_t.at(static_cast<std::size_t>(t - 1)); }
  ScalingDirection scaling_direction() const;
};

// N_{i,t}: issue cycles of opcode i while t threads were active.
struct ExecutionStats {
  std::map<std::pair<Opcode, int>, std::int64_t> n_it;
  std::int64_t n_idl = 0;
  std::int64_t total_cycles = 0;

  std::int64_t issued() const;
  ExecutionStats& operator+=(const ExecutionStats& o);
  friend ExecutionStats operator+(ExecutionStats a, const ExecutionStats& b) { return a += b; }
  friend bool operator==(const ExecutionStats&, const ExecutionStats&) = default;
};

// Throws ValidationError naming the offending field.
void validate(const EnergyModel& model);
void validate(const ExecutionStats& stats);

EnergyModel load_model(const std::string& path);
EnergyModel parse_model(const std::string& json_text);
std::string serialize_model(const EnergyModel& model);
void save_model(const EnergyModel& model, const std::string& path);

// Energy of one issue cycle of `op` with `t` active threads:
// (M_t * P_i * O + P_b) * T_clk, rounded to the nearest femtojoule.
Energy instruction_energy(const EnergyModel& model, Opcode op, int t);

// Energy of one idle cycle, P_b * T_clk.
Energy idle_energy(const EnergyModel& model);

Energy energy(const EnergyModel& model, const ExecutionStats& stats);

std::string to_json(const ExecutionStats& stats);

}  // namespace wattlens
