#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wattlens/machine.hpp"
#include "wattlens/model.hpp"

namespace wattlens {

// Synthetic hardware with data-dependent power.
//
// An issued slot of opcode i following a slot of opcode j dissipates
//
//   P_b + M_t * (O * P_i * d + (O - 1) * |P_i - P_j|)
//
// where d = 1 + delta_i * (2h/W - 1) and h is the Hamming distance between
// the instruction's data words and the previous words on the operand bus.
// Averaged over random data and a single repeated opcode this is exactly
// the per-cycle term of the energy model.
struct DeviceGroundTruth {
  double t_clk_ns = 10.0;
  double p_b_mw = 20.0;
  double overhead = 1.2;
  int t_max = 4;
  std::vector<double> m_t{1.0};
  std::map<Opcode, double> true_p;
  std::map<Opcode, double> data_coeff;
  std::uint64_t seed = 1;
};

DeviceGroundTruth default_device();
void validate(const DeviceGroundTruth& dev);
DeviceGroundTruth parse_device(const std::string& json_text);
DeviceGroundTruth load_device(const std::string& path);
std::string serialize_device(const DeviceGroundTruth& dev);

// The device's constants as an energy model, every opcode flagged profiled.
EnergyModel ground_truth_model(const DeviceGroundTruth& dev);
DeviceGroundTruth device_from_model(const EnergyModel& model, double data_coeff = 0.0, std::uint64_t seed = 1);

// Words an instruction drives onto the operand bus; 0 for pure control.
int data_words(Opcode op);

// Data-scaled power of one instruction, without base power or overhead.
double true_power(const DeviceGroundTruth& dev, Opcode op, std::span<const std::uint32_t> prev,
                  std::span<const std::uint32_t> operands);

enum class OperandRegime { random, constrained };

struct MeasureOptions {
  std::int64_t warmup = 1000;
  OperandRegime regime = OperandRegime::random;
};

// Mean power over cycles [warmup, warmup + duration). Blocked cycles
// dissipate P_b; a kernel that deadlocks stays idle for the rest of the
// window. Throws SimulationError if the kernel halts before the window ends.
double measure_average_power(const DeviceGroundTruth& dev, const Program& kernel, std::int64_t duration_cycles,
                             const MeasureOptions& options = {});

}  // namespace wattlens
