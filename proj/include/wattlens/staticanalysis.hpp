#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "wattlens/energy.hpp"
#include "wattlens/machine.hpp"
#include "wattlens/model.hpp"

namespace wattlens {

enum class BoundKind { upper, lower };

// Execution counts along the extremal path, summed over all invocations.
struct FunctionCounts {
  std::int64_t invocations = 0;
  std::map<int, std::int64_t> blocks;
  std::map<std::pair<int, int>, std::int64_t> edges;
  std::int64_t exits = 0;  // RET or HALT taken
};

struct EnergyBound {
  BoundKind kind = BoundKind::upper;
  Energy value;
  int n_threads = 1;
  int level = 1;  // thread level whose energies were used
  std::map<std::string, Energy> per_invocation;  // by function name
  std::vector<FunctionCounts> counts;  // parallel to Program::functions
  std::map<std::string, std::int64_t> block_counts;  // "function:label"
  std::vector<std::string> notes;
};

// Structural longest path over the loop forest: a loop entered once with
// back-edge bound b costs b * (header to latch) + (header to exit).
// Forked threads add their own bound. Idle cycles are not included.
// Throws AnalysisError when validate_for_analysis fails, on recursion, on
// opcodes the model does not cover, or when no terminating path exists.
EnergyBound wcec(const Program& program, const Cfg& cfg, const EnergyModel& model, int n_threads = 1);

// Shortest path dual: loops iterate their annotated lower bound (0 unless
// `@bound lo..hi`), forked threads contribute nothing.
EnergyBound bcec(const Program& program, const Cfg& cfg, const EnergyModel& model, int n_threads = 1);

// Flow conservation of the reported counts at every block; empty if it holds.
std::vector<std::string> check_flow(const Program& program, const EnergyBound& bound);

// Energy of one execution of the block's own instructions at `level`
// (callees excluded).
Energy block_energy(const EnergyModel& model, const BasicBlock& block, int level);

struct ProfileEntry {
  std::string name;
  std::int64_t count = 0;
  Energy energy;
  double share = 0.0;
};

struct StaticProfile {
  Energy total;
  std::vector<ProfileEntry> blocks;  // program order
  std::vector<ProfileEntry> functions;
};

StaticProfile static_profile(const Program& program, const Cfg& cfg, const EnergyModel& model, int n_threads = 1);

}  // namespace wattlens
