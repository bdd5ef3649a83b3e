#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wattlens/device.hpp"
#include "wattlens/machine.hpp"
#include "wattlens/model.hpp"

namespace wattlens {

struct ProfileConfig {
  // Two unroll lengths per opcode; their difference cancels the loop jump.
  int short_unroll = 16;
  int long_unroll = 64;
  std::int64_t target_cycles = 100'000;  // rounded up to whole kernel periods
  std::int64_t warmup = 1000;
  std::uint64_t kernel_seed = 7;
  Opcode reference = Opcode::ADD;  // opcode used for the M_t kernels
};

// n_threads lockstep threads, each looping `unroll` copies of `op`. Operand
// registers are seeded with random values; addresses stay in range.
// Throws ValidationError for opcodes outside the arith and mem classes.
Program generate_kernel(Opcode op, int n_threads, std::uint64_t seed = 7, int unroll = 16);

// As above but alternating a and b; (a, b) and (b, a) give the same kernel.
Program generate_pair_kernel(Opcode a, Opcode b, int n_threads, std::uint64_t seed = 7, int unroll = 16);

// Every thread blocked on a channel from the first cycle.
Program idle_kernel();

// Raw mean power of a pair kernel over a whole number of its periods.
double measure_kernel(const DeviceGroundTruth& dev, Opcode a, Opcode b, int n_threads, int unroll,
                      const ProfileConfig& config, OperandRegime regime = OperandRegime::random);

// Steady-state per-slot power of a single-opcode kernel with the loop jump
// removed, P_b + M_t * O * P_i on a noiseless device.
double measure_steady_power(const DeviceGroundTruth& dev, Opcode op, int n_threads, const ProfileConfig& config,
                            OperandRegime regime = OperandRegime::random);

// Throws ValidationError with no profileable opcode, Error on a singular
// overhead fit.
EnergyModel fit_model(const DeviceGroundTruth& dev, const std::map<Opcode, InstructionSpec>& isa_meta,
                      const ProfileConfig& config = {});

// Power of the profiled opcode nearest in features, compared by class, then
// memory access, then encoding width, then operand count.
InstructionPower estimate_unprofiled(const EnergyModel& model, const InstructionSpec& spec);

struct Heatmap {
  std::vector<Opcode> opcodes;
  std::vector<std::vector<double>> mw;  // mw[row][col]
};

Heatmap pairwise_heatmap(const DeviceGroundTruth& dev, const std::vector<Opcode>& opcodes, int n_threads,
                         const ProfileConfig& config = {});
std::string heatmap_csv(const Heatmap& h);

}  // namespace wattlens
