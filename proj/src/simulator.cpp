#include "wattlens/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "wattlens/errors.hpp"

namespace wattlens {

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::halted: return "halted";
    case Outcome::deadlock: return "deadlock";
    case Outcome::fuel_exhausted: return "fuel-exhausted";
  }
  return "";
}

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::simulated: return "simulated";
    case Provenance::statistics_extrapolated: return "statistics-extrapolated";
    case Provenance::static_bound: return "static-bound";
  }
  return "";
}

namespace {

using Regs = std::array<std::uint32_t, kRegisterCount>;

struct Decoded {
  Opcode op;
  std::array<int, 3> regs;
  std::uint32_t imm;
  int target;  // block index for branches, function index for CALL/FORK
  int issue_cycles;
  int line;
};

struct DecodedFunction {
  std::vector<std::vector<Decoded>> blocks;
};

std::vector<DecodedFunction> decode(const Program& p) {
  std::vector<DecodedFunction> out;
  for (const auto& f : p.functions) {
    DecodedFunction df;
    for (const auto& b : f.blocks) {
      std::vector<Decoded> ins;
      for (const auto& i : b.instructions) {
        Decoded d{i.op, i.regs, static_cast<std::uint32_t>(i.imm), -1, isa_spec(i.op).issue_cycles, i.line};
        if (i.op == Opcode::BRT || i.op == Opcode::JMP) d.target = f.block_index(i.target);
        if (i.op == Opcode::CALL || i.op == Opcode::FORK) d.target = p.function_index(i.target);
        ins.push_back(d);
      }
      df.blocks.push_back(std::move(ins));
    }
    out.push_back(std::move(df));
  }
  return out;
}

struct Frame {
  int fn = 0;
  Regs r{};
  int ret_block = 0;
  int ret_index = 0;
  int result_reg = 0;
};

struct Thread {
  int tid = 0;
  std::vector<Frame> frames;
  int block = 0;
  int index = 0;
  int slots_done = 0;
  bool finished = false;
  bool has_message = false;
  std::uint32_t message = 0;
  std::int64_t arrival = 0;

  Frame& top() { return frames.back(); }
};

class Machine {
 public:
  Machine(const Program& p, const Inputs& in, const RunOptions& opt) : prog_(p), code_(decode(p)), opt_(opt) {
    if (opt.fuel <= 0) throw SimulationError("fuel must be > 0");
    memory_.assign(kMemoryWords, 0);
    for (auto [a, v] : in.memory) {
      if (a < 0 || a >= kMemoryWords) throw SimulationError("input memory address out of range");
      memory_[static_cast<std::size_t>(a)] = static_cast<std::uint32_t>(v);
    }
    Thread t;
    Frame f;
    f.fn = p.function_index(p.entry);
    if (f.fn < 0) throw SimulationError("entry function not found");
    for (auto [r, v] : in.registers) {
      if (r < 0 || r >= kRegisterCount) throw SimulationError("input register out of range");
      f.r[static_cast<std::size_t>(r)] = static_cast<std::uint32_t>(v);
    }
    t.frames.push_back(f);
    threads_.push_back(std::move(t));
  }

  Trace run() {
    Trace tr;
    std::int64_t cycle = 0;
    int last = -1;
    std::vector<int> runnable;
    bool halted = false;
    while (true) {
      if (halted || all_finished()) {
        tr.outcome = Outcome::halted;
        break;
      }
      if (cycle >= opt_.fuel) {
        tr.outcome = Outcome::fuel_exhausted;
        break;
      }
      runnable.clear();
      bool in_flight = false;
      for (std::size_t i = 0; i < threads_.size(); ++i) {
        Thread& t = threads_[i];
        if (t.finished) continue;
        if (t.has_message && t.arrival > cycle) in_flight = true;
        if (is_runnable(t, cycle)) runnable.push_back(static_cast<int>(i));
      }
      if (runnable.empty()) {
        if (!in_flight) {
          tr.outcome = Outcome::deadlock;
          break;
        }
        ++tr.stats.n_idl;
        ++cycle;
        continue;
      }
      const int active = static_cast<int>(runnable.size());
      for (int i : runnable) ++tr.counts.active_cycles[threads_[i].tid];
      int pick = runnable.front();
      for (int i : runnable)
        if (i > last) {
          pick = i;
          break;
        }
      last = pick;
      Thread& t = threads_[pick];
      const Decoded& d = current(t);
      if (opt_.record_events) {
        tr.events.push_back({cycle, t.tid, d.op, active});
        tr.sites.push_back({t.top().fn, t.block});
      }
      ++tr.stats.n_it[{d.op, active}];
      ++tr.counts.issued[t.tid][d.op];
      if (++t.slots_done == d.issue_cycles) {
        t.slots_done = 0;
        halted = execute(t, d, cycle);
      }
      ++cycle;
    }
    tr.cycles = cycle;
    tr.stats.total_cycles = cycle;
    tr.counts.wall_cycles = cycle;
    tr.registers.assign(threads_[0].frames.back().r.begin(), threads_[0].frames.back().r.end());
    tr.memory = memory_;
    return tr;
  }

 private:
  const Decoded& current(const Thread& t) const {
    return code_[static_cast<std::size_t>(t.frames.back().fn)].blocks[static_cast<std::size_t>(t.block)]
                [static_cast<std::size_t>(t.index)];
  }

  bool all_finished() const {
    return std::all_of(threads_.begin(), threads_.end(), [](const Thread& t) { return t.finished; });
  }

  bool waiting_receiver(const Thread& t, std::uint32_t ch) const {
    if (t.finished || t.has_message || t.slots_done != 0) return false;
    const Decoded& d = current(t);
    return d.op == Opcode::IN && d.imm == ch;
  }

  bool is_runnable(const Thread& t, std::int64_t cycle) const {
    if (t.slots_done > 0) return true;
    const Decoded& d = current(t);
    if (d.op == Opcode::IN) return t.has_message && t.arrival <= cycle;
    if (d.op == Opcode::OUT) {
      for (const Thread& o : threads_)
        if (&o != &t && waiting_receiver(o, d.imm)) return true;
      return false;
    }
    return true;
  }

  [[noreturn]] void fault(const std::string& msg, const Decoded& d) const {
    throw SimulationError(msg + " (line " + std::to_string(d.line) + ")");
  }

  void advance(Thread& t) {
    const auto& blk = code_[static_cast<std::size_t>(t.top().fn)].blocks[static_cast<std::size_t>(t.block)];
    if (++t.index == static_cast<int>(blk.size())) {
      ++t.block;
      t.index = 0;
    }
  }

  void jump(Thread& t, int block) {
    t.block = block;
    t.index = 0;
  }

  // Returns true when the program halts.
  bool execute(Thread& t, const Decoded& d, std::int64_t cycle) {
    Regs& r = t.top().r;
    auto R = [&](int i) -> std::uint32_t& { return r[static_cast<std::size_t>(d.regs[static_cast<std::size_t>(i)])]; };
    switch (d.op) {
      case Opcode::LDC: R(0) = d.imm; break;
      case Opcode::ADD: R(0) = R(1) + R(2); break;
      case Opcode::SUB: R(0) = R(1) - R(2); break;
      case Opcode::MUL: R(0) = R(1) * R(2); break;
      case Opcode::AND: R(0) = R(1) & R(2); break;
      case Opcode::XOR: R(0) = R(1) ^ R(2); break;
      case Opcode::SHL: R(0) = R(1) << (R(2) & 31u); break;
      case Opcode::LDW: {
        std::uint32_t a = R(1);
        if (a >= kMemoryWords) fault("memory read out of bounds at address " + std::to_string(a), d);
        R(0) = memory_[a];
        break;
      }
      case Opcode::STW: {
        std::uint32_t a = R(1);
        if (a >= kMemoryWords) fault("memory write out of bounds at address " + std::to_string(a), d);
        memory_[a] = R(0);
        break;
      }
      case Opcode::BRT:
        if (R(0) != 0) {
          jump(t, d.target);
        } else {
          ++t.block;
          t.index = 0;
        }
        return false;
      case Opcode::JMP: jump(t, d.target); return false;
      case Opcode::CALL: {
        if (t.frames.size() >= 4096) fault("call stack overflow", d);
        Frame f;
        f.fn = d.target;
        for (int i = 0; d.regs[0] + i < kRegisterCount; ++i) f.r[static_cast<std::size_t>(i)] = r[static_cast<std::size_t>(d.regs[0] + i)];
        advance(t);
        f.ret_block = t.block;
        f.ret_index = t.index;
        f.result_reg = d.regs[0];
        t.frames.push_back(f);
        jump(t, 0);
        return false;
      }
      case Opcode::RET: {
        if (t.frames.size() == 1) {
          t.finished = true;
          return false;
        }
        Frame done = t.frames.back();
        t.frames.pop_back();
        t.top().r[static_cast<std::size_t>(done.result_reg)] = done.r[0];
        t.block = done.ret_block;
        t.index = done.ret_index;
        return false;
      }
      case Opcode::FORK: {
        int live = static_cast<int>(std::count_if(threads_.begin(), threads_.end(), [](const Thread& x) { return !x.finished; }));
        if (live >= opt_.t_max) fault("FORK beyond t_max=" + std::to_string(opt_.t_max), d);
        Thread n;
        n.tid = static_cast<int>(threads_.size());
        Frame f;
        f.fn = d.target;
        for (int i = 0; d.regs[0] + i < kRegisterCount; ++i) f.r[static_cast<std::size_t>(i)] = r[static_cast<std::size_t>(d.regs[0] + i)];
        n.frames.push_back(f);
        advance(t);
        threads_.push_back(std::move(n));  // invalidates t and r
        return false;
      }
      case Opcode::OUT: {
        for (Thread& o : threads_) {
          if (&o != &t && waiting_receiver(o, d.imm)) {
            o.has_message = true;
            o.message = R(0);
            o.arrival = cycle + opt_.channel_latency;
            break;
          }
        }
        break;
      }
      case Opcode::IN:
        R(0) = t.message;
        t.has_message = false;
        break;
      case Opcode::HALT: return true;
    }
    advance(t);
    return false;
  }

  const Program& prog_;
  std::vector<DecodedFunction> code_;
  RunOptions opt_;
  std::vector<std::uint32_t> memory_;
  std::vector<Thread> threads_;
};

}  // namespace

Trace run(const Program& program, const Inputs& inputs, const RunOptions& options) {
  return Machine(program, inputs, options).run();
}

ExecutionStats stats_of(const Trace& trace) {
  ExecutionStats s;
  for (const auto& e : trace.events) ++s.n_it[{e.op, e.active}];
  s.total_cycles = trace.cycles;
  s.n_idl = trace.cycles - static_cast<std::int64_t>(trace.events.size());
  return s;
}

EnergyReport trace_energy(const EnergyModel& model, const Program& program, const Trace& trace) {
  if (trace.events.size() != static_cast<std::size_t>(trace.stats.issued()))
    throw Error("trace_energy needs a trace recorded with events");
  EnergyReport rep;
  rep.provenance = Provenance::simulated;
  std::int64_t idle_cycles = trace.cycles - static_cast<std::int64_t>(trace.events.size());
  rep.idle = idle_energy(model) * idle_cycles;
  rep.total = rep.idle;
  // Accumulate per site first, then map to names once.
  std::map<std::pair<int, int>, Energy> by_site;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const TraceEvent& e = trace.events[i];
    if (e.active > model.t_max)
      throw ValidationError("t", "trace has " + std::to_string(e.active) + " active threads, model t_max is " +
                                     std::to_string(model.t_max));
    Energy u = instruction_energy(model, e.op, e.active);
    rep.total += u;
    by_site[{trace.sites[i].function, trace.sites[i].block}] += u;
  }
  for (const auto& [site, en] : by_site) {
    const Function& f = program.functions[static_cast<std::size_t>(site.first)];
    rep.per_function[f.name] += en;
    rep.per_block[f.name + ":" + f.blocks[static_cast<std::size_t>(site.second)].label] += en;
  }
  return rep;
}

ExecutionStats extrapolate_stats(const PerThreadCounts& c, int t_max) {
  if (t_max < 1) throw ValidationError("t_max", "t_max must be >= 1");
  std::int64_t busy = 0;
  std::int64_t issued_total = 0;
  for (const auto& [tid, ops] : c.issued) {
    std::int64_t n = 0;
    for (const auto& [op, k] : ops) n += k;
    auto it = c.active_cycles.find(tid);
    std::int64_t act = it == c.active_cycles.end() ? 0 : it->second;
    if (n > act) throw ValidationError("counts", "thread " + std::to_string(tid) + " issued more than it was active");
    issued_total += n;
  }
  for (const auto& [tid, act] : c.active_cycles) {
    if (act > c.wall_cycles)
      throw ValidationError("counts", "thread " + std::to_string(tid) + " active longer than the wall clock");
    busy += act;
  }
  if (issued_total > c.wall_cycles) throw ValidationError("counts", "more issues than wall-clock cycles");
  int level = 1;
  if (c.wall_cycles > 0) {
    double ratio = static_cast<double>(busy) / static_cast<double>(c.wall_cycles);
    level = static_cast<int>(std::llround(ratio));
    level = std::clamp(level, 1, t_max);
  }
  ExecutionStats s;
  for (const auto& [tid, ops] : c.issued)
    for (const auto& [op, k] : ops)
      if (k > 0) s.n_it[{op, level}] += k;
  double idle = static_cast<double>(c.wall_cycles) - static_cast<double>(busy) / level;
  s.n_idl = std::max<std::int64_t>(0, std::llround(idle));
  s.total_cycles = s.n_idl + s.issued();
  return s;
}

EnergyReport statistics_energy(const EnergyModel& model, const PerThreadCounts& counts) {
  ExecutionStats s = extrapolate_stats(counts, model.t_max);
  EnergyReport rep;
  rep.provenance = Provenance::statistics_extrapolated;
  rep.idle = idle_energy(model) * s.n_idl;
  rep.total = energy(model, s);
  return rep;
}

std::string trace_to_jsonl(const Trace& trace) {
  std::string out;
  for (const auto& e : trace.events) {
    nlohmann::ordered_json j;
    j["c"] = e.cycle;
    j["tid"] = e.tid;
    j["op"] = std::string(opcode_name(e.op));
    j["act"] = e.active;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace wattlens
