#include "wattlens/staticanalysis.hpp"

#include <algorithm>
#include <functional>
#include <optional>

#include "wattlens/errors.hpp"

namespace wattlens {

namespace {

constexpr int kExit = -1;

struct Arrival {
  int prev = -1;  // condensed node key, -1 at the region entry
  int from = -1;
  int to = -1;  // kExit for RET/HALT
};

struct Best {
  std::int64_t value = 0;
  Arrival arr;
};

struct Region {
  int loop = -1;  // -1 for the function body
  std::map<int, Arrival> arrival;  // per condensed node key
  std::optional<Best> latch;  // best path to a back edge
  std::int64_t back_bound = 0;
  std::map<int, Best> exits;  // target block or kExit
  std::map<int, std::int64_t> summary;  // target -> cost of the whole loop
};

struct FunctionState {
  std::map<int, Region> loops;
  Region body;
  std::int64_t cost = 0;
  FunctionCounts per_call;
  int mark = 0;  // 0 new, 1 visiting, 2 done
};

class Analyzer {
 public:
  Analyzer(const Program& p, const Cfg& cfg, const EnergyModel& m, BoundKind kind, int n_threads)
      : p_(p), cfg_(cfg), m_(m), kind_(kind), n_(n_threads), fs_(p.functions.size()) {}

  EnergyBound run() {
    std::vector<std::string> diags = validate_for_analysis(p_, cfg_);
    if (n_ < 1 || n_ > m_.t_max) diags.push_back("thread count " + std::to_string(n_) + " outside 1.." + std::to_string(m_.t_max));
    for (const auto& f : p_.functions)
      for (const auto& b : f.blocks)
        for (const auto& i : b.instructions)
          if (!m_.power.contains(i.op)) {
            std::string d = "model has no power for " + std::string(opcode_name(i.op));
            if (std::find(diags.begin(), diags.end(), d) == diags.end()) diags.push_back(d);
          }
    if (!diags.empty()) throw AnalysisError(diags);
    pick_level();
    const int entry = p_.function_index(p_.entry);
    solve(entry);

    EnergyBound out;
    out.kind = kind_;
    out.n_threads = n_;
    out.level = level_;
    out.value = Energy::from_fj(fs_[static_cast<std::size_t>(entry)].cost);
    out.counts.resize(p_.functions.size());
    for (std::size_t f = 0; f < p_.functions.size(); ++f)
      if (fs_[f].mark == 2) out.per_invocation[p_.functions[f].name] = Energy::from_fj(fs_[f].cost);
    spread_counts(entry, out);
    bool forks = false;
    for (const auto& f : p_.functions)
      for (const auto& b : f.blocks)
        for (const auto& i : b.instructions) forks |= i.op == Opcode::FORK;
    if (forks) {
      out.notes.push_back("idle energy excluded; per-thread bounds summed");
      if (kind_ == BoundKind::lower) out.notes.push_back("forked threads contribute nothing to the lower bound");
    }
    return out;
  }

 private:
  bool better(std::int64_t a, std::int64_t b) const { return kind_ == BoundKind::upper ? a > b : a < b; }

  void pick_level() {
    ScalingDirection dir = m_.scaling_direction();
    bool high = dir == ScalingDirection::non_decreasing;
    if (kind_ == BoundKind::lower) high = !high && dir != ScalingDirection::constant;
    level_ = high ? n_ : 1;
  }

  std::int64_t own(const BasicBlock& b) const { return block_energy(m_, b, level_).fj(); }

  std::int64_t block_cost(int f, int b) {
    const BasicBlock& blk = p_.functions[static_cast<std::size_t>(f)].blocks[static_cast<std::size_t>(b)];
    std::int64_t c = own(blk);
    for (const auto& i : blk.instructions) {
      if (i.op == Opcode::CALL || (i.op == Opcode::FORK && kind_ == BoundKind::upper)) {
        int g = p_.function_index(i.target);
        solve(g);
        c += fs_[static_cast<std::size_t>(g)].cost;
      }
    }
    return c;
  }

  void solve(int f) {
    FunctionState& st = fs_[static_cast<std::size_t>(f)];
    if (st.mark == 2) return;
    const Function& fn = p_.functions[static_cast<std::size_t>(f)];
    if (st.mark == 1) throw AnalysisError({"recursion through function " + fn.name + " is not supported"});
    st.mark = 1;
    if (fn.name != p_.entry) {
      for (std::size_t b = 0; b < fn.blocks.size(); ++b)
        if (cfg_.functions[static_cast<std::size_t>(f)].reachable[b] && fn.blocks[b].terminator() == Terminator::halt)
          throw AnalysisError({"function " + fn.name + " may HALT; only the entry function may halt"});
    }
    const FunctionCfg& fc = cfg_.functions[static_cast<std::size_t>(f)];
    std::vector<std::int64_t> costs(fn.blocks.size(), 0);
    for (std::size_t b = 0; b < fn.blocks.size(); ++b)
      if (fc.reachable[b]) costs[b] = block_cost(f, static_cast<int>(b));
    for (int l = static_cast<int>(fc.loops.size()) - 1; l >= 0; --l) solve_region(f, l, costs);
    solve_region(f, -1, costs);
    auto ex = st.body.exits.find(kExit);
    if (ex == st.body.exits.end()) throw AnalysisError({"function " + fn.name + " has no terminating path"});
    st.cost = ex->second.value;
    FunctionCounts c;
    walk(f, st.body, ex->second.arr, 1, c);
    c.exits = 1;
    c.invocations = 1;
    st.per_call = c;
    st.mark = 2;
  }

  // Key of the condensed node containing block v inside region `loop`.
  int node_of(const FunctionCfg& fc, int loop, int v) const {
    int l = fc.innermost_loop[static_cast<std::size_t>(v)];
    if (l == loop) return v;
    while (l >= 0 && fc.loops[static_cast<std::size_t>(l)].parent != loop) l = fc.loops[static_cast<std::size_t>(l)].parent;
    if (l < 0) return v;
    return static_cast<int>(fc.succ.size()) + l;
  }

  bool in_region(const FunctionCfg& fc, int loop, int v) const {
    if (loop < 0) return true;
    const auto& bl = fc.loops[static_cast<std::size_t>(loop)].blocks;
    return std::binary_search(bl.begin(), bl.end(), v);
  }

  void solve_region(int f, int loop, const std::vector<std::int64_t>& costs) {
    FunctionState& st = fs_[static_cast<std::size_t>(f)];
    const Function& fn = p_.functions[static_cast<std::size_t>(f)];
    const FunctionCfg& fc = cfg_.functions[static_cast<std::size_t>(f)];
    const int nb = static_cast<int>(fc.succ.size());
    Region R;
    R.loop = loop;
    const int head = loop < 0 ? 0 : fc.loops[static_cast<std::size_t>(loop)].header;

    // Condensed successors.
    auto out_targets = [&](int key) {
      std::vector<int> t;
      if (key < nb) {
        for (int s : fc.succ[static_cast<std::size_t>(key)]) t.push_back(s);
      } else {
        for (const auto& [target, cost] : st.loops.at(key - nb).summary) t.push_back(target);
      }
      return t;
    };
    const int start = node_of(fc, loop, head);
    std::vector<int> order;
    std::map<int, bool> seen;
    std::function<void(int)> dfs = [&](int key) {
      seen[key] = true;
      for (int s : out_targets(key)) {
        if (s == kExit || !in_region(fc, loop, s) || (loop >= 0 && s == head)) continue;
        int k = node_of(fc, loop, s);
        if (!seen[k]) dfs(k);
      }
      order.push_back(key);
    };
    dfs(start);
    std::reverse(order.begin(), order.end());

    std::map<int, std::int64_t> in;
    in[start] = 0;
    R.arrival[start] = Arrival{};
    auto arrive = [&](int v, std::int64_t val, Arrival a) {
      auto offer = [&](std::optional<Best>& slot) {
        if (!slot || better(val, slot->value)) slot = Best{val, a};
      };
      if (v == kExit || !in_region(fc, loop, v)) {
        auto it = R.exits.find(v);
        if (it == R.exits.end() || better(val, it->second.value)) R.exits[v] = Best{val, a};
      } else if (loop >= 0 && v == head) {
        offer(R.latch);
      } else {
        int k = node_of(fc, loop, v);
        auto it = in.find(k);
        if (it == in.end() || better(val, it->second)) {
          in[k] = val;
          R.arrival[k] = a;
        }
      }
    };
    for (int key : order) {
      auto it = in.find(key);
      if (it == in.end()) continue;
      std::int64_t base = it->second;
      if (key < nb) {
        std::int64_t d = base + costs[static_cast<std::size_t>(key)];
        Terminator term = fn.blocks[static_cast<std::size_t>(key)].terminator();
        if (term == Terminator::ret || term == Terminator::halt) arrive(kExit, d, Arrival{key, key, kExit});
        for (int s : fc.succ[static_cast<std::size_t>(key)]) arrive(s, d, Arrival{key, key, s});
      } else {
        const Region& child = st.loops.at(key - nb);
        for (const auto& [target, cost] : child.summary) {
          const Arrival& ea = child.exits.at(target).arr;
          arrive(target, base + cost, Arrival{key, ea.from, ea.to});
        }
      }
    }

    if (loop >= 0) {
      const Loop& L = fc.loops[static_cast<std::size_t>(loop)];
      for (auto [u, h] : L.back_edges) {
        const LoopBound& b = fn.loop_bounds.at(u);
        R.back_bound += kind_ == BoundKind::upper ? b.hi : b.lo;
      }
      std::int64_t around = R.latch ? R.back_bound * R.latch->value : 0;
      for (const auto& [target, best] : R.exits) R.summary[target] = around + best.value;
      if (R.exits.empty())
        throw AnalysisError({"loop at " + fn.name + ":" + fn.blocks[static_cast<std::size_t>(head)].label + " has no exit"});
      st.loops[loop] = std::move(R);
    } else {
      st.body = std::move(R);
    }
  }

  // Add `mult` traversals of the path ending in `a` to the counts.
  void walk(int f, const Region& R, Arrival a, std::int64_t mult, FunctionCounts& c) {
    FunctionState& st = fs_[static_cast<std::size_t>(f)];
    const int nb = static_cast<int>(cfg_.functions[static_cast<std::size_t>(f)].succ.size());
    while (a.prev != -1) {
      if (a.prev < nb) {
        if (a.to != kExit) c.edges[{a.from, a.to}] += mult;
        c.blocks[a.prev] += mult;
      } else {  // the loop's own exit path carries the exit edge
        const Region& child = st.loops.at(a.prev - nb);
        expand_loop(f, child, a.to, mult, c);
      }
      a = R.arrival.at(a.prev);
    }
  }

  void expand_loop(int f, const Region& L, int target, std::int64_t mult, FunctionCounts& c) {
    if (L.latch && L.back_bound > 0) walk(f, L, L.latch->arr, mult * L.back_bound, c);
    walk(f, L, L.exits.at(target).arr, mult, c);
  }

  void spread_counts(int entry, EnergyBound& out) {
    // Callers before callees: reverse post-order of the call graph.
    std::vector<int> order;
    std::vector<bool> seen(p_.functions.size(), false);
    std::function<void(int)> dfs = [&](int f) {
      seen[static_cast<std::size_t>(f)] = true;
      for (const auto& b : p_.functions[static_cast<std::size_t>(f)].blocks)
        for (const auto& i : b.instructions)
          if (i.op == Opcode::CALL || i.op == Opcode::FORK) {
            int g = p_.function_index(i.target);
            if (!seen[static_cast<std::size_t>(g)]) dfs(g);
          }
      order.push_back(f);
    };
    dfs(entry);
    std::reverse(order.begin(), order.end());
    std::vector<std::int64_t> calls(p_.functions.size(), 0);
    calls[static_cast<std::size_t>(entry)] = 1;
    for (int f : order) {
      const std::int64_t k = calls[static_cast<std::size_t>(f)];
      const FunctionState& st = fs_[static_cast<std::size_t>(f)];
      FunctionCounts& fc = out.counts[static_cast<std::size_t>(f)];
      const Function& fn = p_.functions[static_cast<std::size_t>(f)];
      fc.invocations = k;
      if (k == 0) continue;
      fc.exits = k * st.per_call.exits;
      for (const auto& [b, n] : st.per_call.blocks) {
        fc.blocks[b] = k * n;
        for (const auto& i : fn.blocks[static_cast<std::size_t>(b)].instructions)
          if (i.op == Opcode::CALL || (i.op == Opcode::FORK && kind_ == BoundKind::upper))
            calls[static_cast<std::size_t>(p_.function_index(i.target))] += k * n;
      }
      for (const auto& [e, n] : st.per_call.edges) fc.edges[e] = k * n;
      for (std::size_t b = 0; b < fn.blocks.size(); ++b) {
        auto it = fc.blocks.find(static_cast<int>(b));
        out.block_counts[fn.name + ":" + fn.blocks[b].label] = it == fc.blocks.end() ? 0 : it->second;
      }
    }
  }

  const Program& p_;
  const Cfg& cfg_;
  const EnergyModel& m_;
  BoundKind kind_;
  int n_;
  int level_ = 1;
  std::vector<FunctionState> fs_;
};

}  // namespace

Energy block_energy(const EnergyModel& model, const BasicBlock& block, int level) {
  Energy e;
  for (const auto& i : block.instructions) e += instruction_energy(model, i.op, level) * isa_spec(i.op).issue_cycles;
  return e;
}

EnergyBound wcec(const Program& program, const Cfg& cfg, const EnergyModel& model, int n_threads) {
  return Analyzer(program, cfg, model, BoundKind::upper, n_threads).run();
}

EnergyBound bcec(const Program& program, const Cfg& cfg, const EnergyModel& model, int n_threads) {
  return Analyzer(program, cfg, model, BoundKind::lower, n_threads).run();
}

std::vector<std::string> check_flow(const Program& program, const EnergyBound& bound) {
  std::vector<std::string> out;
  for (std::size_t f = 0; f < program.functions.size(); ++f) {
    const Function& fn = program.functions[f];
    const FunctionCounts& c = bound.counts.at(f);
    std::map<int, std::int64_t> in, outflow;
    for (const auto& [e, n] : c.edges) {
      outflow[e.first] += n;
      in[e.second] += n;
    }
    in[0] += c.invocations;
    std::int64_t exits = 0;
    for (std::size_t b = 0; b < fn.blocks.size(); ++b) {
      int bi = static_cast<int>(b);
      std::int64_t n = c.blocks.contains(bi) ? c.blocks.at(bi) : 0;
      Terminator t = fn.blocks[b].terminator();
      std::int64_t leaving = outflow[bi];
      if (t == Terminator::ret || t == Terminator::halt) {
        leaving += n;
        exits += n;
      }
      std::string where = fn.name + ":" + fn.blocks[b].label;
      if (in[bi] != n) out.push_back("inflow mismatch at " + where);
      if (leaving != n) out.push_back("outflow mismatch at " + where);
    }
    if (exits != c.exits) out.push_back("exit count mismatch in " + fn.name);
    for (const auto& [e, n] : c.edges) {
      auto s = successors(fn, e.first);
      if (std::find(s.begin(), s.end(), e.second) == s.end()) out.push_back("count on a non-edge in " + fn.name);
    }
  }
  return out;
}

StaticProfile static_profile(const Program& program, const Cfg& cfg, const EnergyModel& model, int n_threads) {
  EnergyBound b = wcec(program, cfg, model, n_threads);
  StaticProfile prof;
  prof.total = b.value;
  for (std::size_t f = 0; f < program.functions.size(); ++f) {
    const Function& fn = program.functions[f];
    ProfileEntry fe{fn.name, b.counts[f].invocations, Energy{}, 0.0};
    for (std::size_t k = 0; k < fn.blocks.size(); ++k) {
      auto it = b.counts[f].blocks.find(static_cast<int>(k));
      std::int64_t n = it == b.counts[f].blocks.end() ? 0 : it->second;
      Energy e = block_energy(model, fn.blocks[k], b.level) * n;
      prof.blocks.push_back({fn.name + ":" + fn.blocks[k].label, n, e, 0.0});
      fe.energy += e;
    }
    prof.functions.push_back(fe);
  }
  const double total = static_cast<double>(prof.total.fj());
  auto share = [&](std::vector<ProfileEntry>& es) {
    if (total > 0) {
      for (auto& e : es) e.share = static_cast<double>(e.energy.fj()) / total;
    } else {
      std::size_t live = std::count_if(es.begin(), es.end(), [](const ProfileEntry& e) { return e.count > 0; });
      for (auto& e : es) e.share = e.count > 0 ? 1.0 / static_cast<double>(live) : 0.0;
    }
  };
  share(prof.blocks);
  share(prof.functions);
  return prof;
}

}  // namespace wattlens
