#include <algorithm>
#include <functional>

#include "wattlens/machine.hpp"

namespace wattlens {

std::vector<int> successors(const Function& f, int b) {
  const BasicBlock& blk = f.blocks[static_cast<std::size_t>(b)];
  int next = b + 1 < static_cast<int>(f.blocks.size()) ? b + 1 : -1;
  switch (blk.terminator()) {
    case Terminator::fallthrough: return next >= 0 ? std::vector<int>{next} : std::vector<int>{};
    case Terminator::jump: return {f.block_index(blk.instructions.back().target)};
    case Terminator::branch: {
      int taken = f.block_index(blk.instructions.back().target);
      std::vector<int> s{taken};
      if (next >= 0 && next != taken) s.push_back(next);
      return s;
    }
    case Terminator::ret:
    case Terminator::halt: return {};
  }
  return {};
}

bool FunctionCfg::dominates(int a, int b) const {
  if (b < 0 || !reachable[static_cast<std::size_t>(b)]) return false;
  for (int x = b;; x = idom[static_cast<std::size_t>(x)]) {
    if (x == a) return true;
    if (idom[static_cast<std::size_t>(x)] == x) return false;
  }
}

FunctionCfg build_function_cfg(const Function& f) {
  const int n = static_cast<int>(f.blocks.size());
  FunctionCfg g;
  g.succ.resize(n);
  g.pred.resize(n);
  for (int b = 0; b < n; ++b) {
    g.succ[b] = successors(f, b);
    for (int s : g.succ[b]) g.pred[s].push_back(b);
  }

  // Iterative DFS for postorder plus retreating-edge detection.
  g.reachable.assign(n, false);
  std::vector<int> post, state(n, 0);  // 0 new, 1 on stack, 2 done
  std::vector<std::pair<int, int>> retreating;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  state[0] = 1;
  while (!stack.empty()) {
    auto& [b, i] = stack.back();
    if (i < g.succ[b].size()) {
      int s = g.succ[b][i++];
      if (state[s] == 0) {
        state[s] = 1;
        stack.push_back({s, 0});
      } else if (state[s] == 1) {
        retreating.push_back({b, s});
      }
    } else {
      state[b] = 2;
      post.push_back(b);
      stack.pop_back();
    }
  }
  for (int b : post) g.reachable[b] = true;

  std::vector<int> order(n, -1);  // postorder number
  for (std::size_t i = 0; i < post.size(); ++i) order[post[i]] = static_cast<int>(i);
  g.idom.assign(n, -1);
  g.idom[0] = 0;
  auto intersect = [&](int a, int b) {
    while (a != b) {
      while (order[a] < order[b]) a = g.idom[a];
      while (order[b] < order[a]) b = g.idom[b];
    }
    return a;
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (auto it = post.rbegin(); it != post.rend(); ++it) {
      int b = *it;
      if (b == 0) continue;
      int nd = -1;
      for (int p : g.pred[b]) {
        if (g.idom[p] < 0) continue;
        nd = nd < 0 ? p : intersect(p, nd);
      }
      if (nd != g.idom[b]) {
        g.idom[b] = nd;
        changed = true;
      }
    }
  }

  for (auto [u, v] : retreating)
    if (!g.dominates(v, u)) g.reducible = false;

  // Natural loops, one per header.
  std::vector<std::vector<std::pair<int, int>>> by_header(n);
  for (int u = 0; u < n; ++u) {
    if (!g.reachable[u]) continue;
    for (int v : g.succ[u])
      if (g.dominates(v, u)) by_header[v].push_back({u, v});
  }
  for (int h = 0; h < n; ++h) {
    if (by_header[h].empty()) continue;
    Loop L;
    L.header = h;
    L.back_edges = by_header[h];
    std::vector<bool> in(n, false);
    in[h] = true;
    std::vector<int> work;
    for (auto [u, v] : L.back_edges)
      if (!in[u]) {
        in[u] = true;
        work.push_back(u);
      }
    while (!work.empty()) {
      int x = work.back();
      work.pop_back();
      for (int p : g.pred[x])
        if (g.reachable[p] && !in[p]) {
          in[p] = true;
          work.push_back(p);
        }
    }
    for (int b = 0; b < n; ++b)
      if (in[b]) L.blocks.push_back(b);
    g.loops.push_back(std::move(L));
  }
  std::stable_sort(g.loops.begin(), g.loops.end(),
                   [](const Loop& a, const Loop& b) { return a.blocks.size() > b.blocks.size(); });
  auto contains = [](const Loop& L, int b) { return std::binary_search(L.blocks.begin(), L.blocks.end(), b); };
  g.innermost_loop.assign(n, -1);
  for (std::size_t i = 0; i < g.loops.size(); ++i) {
    Loop& L = g.loops[i];
    for (std::size_t j = i; j-- > 0;) {
      if (contains(g.loops[j], L.header) && g.loops[j].blocks.size() > L.blocks.size()) {
        if (L.parent < 0 || g.loops[j].blocks.size() < g.loops[L.parent].blocks.size())
          L.parent = static_cast<int>(j);
      }
    }
    L.depth = L.parent < 0 ? 1 : g.loops[L.parent].depth + 1;
    for (int b : L.blocks) g.innermost_loop[b] = static_cast<int>(i);
  }
  return g;
}

Cfg build_cfg(const Program& p) {
  Cfg cfg;
  for (const auto& f : p.functions) cfg.functions.push_back(build_function_cfg(f));
  return cfg;
}

std::vector<std::string> validate_for_analysis(const Program& p, const Cfg& cfg) {
  std::vector<std::string> out;
  for (std::size_t fi = 0; fi < p.functions.size(); ++fi) {
    const Function& f = p.functions[fi];
    const FunctionCfg& g = cfg.functions[fi];
    if (!g.reducible) out.push_back("function '" + f.name + "': irreducible control flow");
    for (const Loop& L : g.loops) {
      for (auto [u, v] : L.back_edges) {
        if (!f.loop_bounds.contains(u)) {
          const auto& ins = f.blocks[static_cast<std::size_t>(u)].instructions.back();
          out.push_back("function '" + f.name + "': loop at '" + f.blocks[static_cast<std::size_t>(v)].label +
                        "' missing @bound on back edge at line " + std::to_string(ins.line));
        }
      }
    }
  }
  return out;
}

}  // namespace wattlens
