#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wattlens/energy.hpp"
#include "wattlens/machine.hpp"
#include "wattlens/model.hpp"

namespace wattlens {

struct TraceEvent {
  std::int64_t cycle = 0;
  int tid = 0;
  Opcode op = Opcode::HALT;
  int active = 1;  // threads runnable in this cycle
  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

// Where an event's instruction lives; parallel to Trace::events.
struct EventSite {
  int function = 0;
  int block = 0;
  friend bool operator==(const EventSite&, const EventSite&) = default;
};

enum class Outcome { halted, deadlock, fuel_exhausted };
std::string_view outcome_name(Outcome o);

// Per-thread statistics kept without a full trace.
struct PerThreadCounts {
  std::map<int, std::map<Opcode, std::int64_t>> issued;  // issue cycles per opcode
  std::map<int, std::int64_t> active_cycles;  // cycles the thread was runnable
  std::int64_t wall_cycles = 0;
  friend bool operator==(const PerThreadCounts&, const PerThreadCounts&) = default;
};

struct Inputs {
  std::map<int, std::int64_t> registers;  // entry thread, by register number
  std::map<int, std::int64_t> memory;  // by word address
};

struct RunOptions {
  std::int64_t fuel = 10'000'000;
  bool record_events = true;
  int t_max = 4;
  // Cycles between an OUT issuing and the matching IN becoming runnable.
  int channel_latency = 3;
};

struct Trace {
  std::vector<TraceEvent> events;
  std::vector<EventSite> sites;
  std::int64_t cycles = 0;  // wall-clock cycles, idle ones included
  Outcome outcome = Outcome::halted;
  std::vector<std::uint32_t> registers;  // entry thread's innermost frame at exit
  std::vector<std::uint32_t> memory;
  PerThreadCounts counts;
  ExecutionStats stats;  // kept online; equals stats_of(*this) when events are recorded
};

// Deterministic round-robin execution, one issue slot per cycle.
Trace run(const Program& program, const Inputs& inputs, const RunOptions& options = {});

ExecutionStats stats_of(const Trace& trace);

enum class Provenance { simulated, statistics_extrapolated, static_bound };
std::string_view provenance_name(Provenance p);

struct EnergyReport {
  Energy total;
  Provenance provenance = Provenance::simulated;
  Energy idle;  // part of total spent in idle cycles
  std::map<std::string, Energy> per_function;
  std::map<std::string, Energy> per_block;  // "function:label"
};

// Requires recorded events. Equals energy(model, stats_of(trace)).
EnergyReport trace_energy(const EnergyModel& model, const Program& program, const Trace& trace);

ExecutionStats extrapolate_stats(const PerThreadCounts& counts, int t_max);
EnergyReport statistics_energy(const EnergyModel& model, const PerThreadCounts& counts);

std::string trace_to_jsonl(const Trace& trace);

}  // namespace wattlens
