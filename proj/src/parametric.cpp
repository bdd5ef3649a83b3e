#include <functional>
#include <set>

#include "json.hpp"

#include "wattlens/errors.hpp"
#include "wattlens/parametric.hpp"

namespace wattlens::parametric {

using hir::Cond;
using hir::Expr;
using hir::HirFunction;
using hir::HirProgram;
using hir::Interval;
using hir::IntervalEnv;
using hir::Part;
using hir::RelOp;
using hir::Stmt;
using hir::StmtKind;

namespace {

[[noreturn]] void unsupported(const std::string& what) { throw UnsupportedError(what + " (outside the polynomial class)"); }

Polynomial pj(Energy e) { return Polynomial(Rational(e.fj(), 1000)); }

RelExpr leaf(Polynomial p) {
  RelExpr r;
  r.poly = std::move(p);
  return r;
}

RelExpr add(RelExpr a, RelExpr b) {
  if (a.kind == RelExpr::Kind::poly && b.kind == RelExpr::Kind::poly) return leaf(a.poly + b.poly);
  if (a.kind == RelExpr::Kind::poly && a.poly.is_zero()) return b;
  if (b.kind == RelExpr::Kind::poly && b.poly.is_zero()) return a;
  RelExpr r;
  r.kind = RelExpr::Kind::add;
  for (RelExpr* x : {&a, &b}) {
    if (x->kind == RelExpr::Kind::add)
      for (auto& y : x->args) r.args.push_back(std::move(y));
    else
      r.args.push_back(std::move(*x));
  }
  return r;
}

RelExpr merge(RelExpr a, RelExpr b, Bound mode) {
  if (a.kind == RelExpr::Kind::poly && b.kind == RelExpr::Kind::poly)
    return leaf(mode == Bound::upper ? coeff_max(a.poly, b.poly) : coeff_min(a.poly, b.poly));
  RelExpr r;
  r.kind = mode == Bound::upper ? RelExpr::Kind::max : RelExpr::Kind::min;
  r.args = {std::move(a), std::move(b)};
  return r;
}

RelExpr scale(std::int64_t k, RelExpr e) {
  if (e.kind == RelExpr::Kind::poly) return leaf(Polynomial(Rational(k)) * e.poly);
  RelExpr r;
  r.kind = RelExpr::Kind::scale;
  r.poly = Polynomial(Rational(k));
  r.args = {std::move(e)};
  return r;
}

using Opt = std::optional<RelExpr>;

Opt plus(const Opt& a, const RelExpr& b) {
  if (!a) return std::nullopt;
  return add(*a, b);
}

Opt pick(const Opt& a, const Opt& b, Bound mode) {
  if (!a) return b;
  if (!b) return a;
  return merge(*a, *b, mode);
}

struct Exits {
  Opt ft;
  Opt ret;
};

bool contains_self(const RelExpr& e) {
  if (e.kind == RelExpr::Kind::self) return true;
  for (const auto& a : e.args)
    if (contains_self(a)) return true;
  return false;
}

std::optional<bool> settle(const Cond& c, const IntervalEnv& env) { return hir::decide(c, env); }

// Parameters that may appear in a cost function: never assigned, with a
// non-negative domain.
std::vector<std::string> symbolic_params(const HirFunction& f) {
  IntervalEnv env = hir::entry_env(f);
  std::vector<std::string> out;
  for (const auto& p : f.params)
    if (env.contains(p.name) && p.lo >= 0) out.push_back(p.name);
  return out;
}

struct SelfShape {
  std::size_t position = 0;
  std::int64_t shift = 0;
};

class Extractor {
 public:
  Extractor(const HirProgram& p, const hir::HirCosts& c, const HirFunction& f, Bound mode,
            std::optional<SelfShape> self)
      : p_(p), c_(c), f_(f), mode_(mode), self_(self) {
    for (const auto& name : symbolic_params(f)) symbols_.insert(name);
    for (const auto& pr : f.params) domain_[pr.name] = {pr.lo, pr.hi};
  }

  RelExpr function(const IntervalEnv& env) {
    Exits x = list(f_.body, env);
    Opt r = pick(plus(x.ft, leaf(pj(c_.part(f_.glue_id, Part::main)))), x.ret, mode_);
    return r.value_or(leaf(Polynomial()));
  }

 private:
  struct Scope {
    std::string var;
    Polynomial lo, hi;
  };

  std::optional<Polynomial> poly(const Expr& e, const IntervalEnv& env) const {
    if (!hir::eval_interval(e, env)) return std::nullopt;
    switch (e.kind) {
      case Expr::Kind::constant: return Polynomial(Rational(static_cast<std::int64_t>(e.value)));
      case Expr::Kind::var:
        if (!symbols_.contains(e.name)) return std::nullopt;
        return Polynomial::variable(e.name);
      case Expr::Kind::binary: {
        auto a = poly(e.args[0], env);
        auto b = poly(e.args[1], env);
        if (!a || !b) return std::nullopt;
        if (e.op == hir::BinOp::add) return *a + *b;
        if (e.op == hir::BinOp::sub) return *a - *b;
        if (e.op == hir::BinOp::mul) return *a * *b;
        return std::nullopt;
      }
      default: return std::nullopt;
    }
  }

  // Whether p >= 0 at every point reachable inside the current loop nest.
  bool nonneg(const Polynomial& p, std::size_t depth) const {
    for (std::size_t s = depth; s-- > 0;) {
      const Scope& sc = scopes_[s];
      int d = p.degree_in(sc.var);
      if (d == 0) continue;
      if (d > 1) return false;
      Polynomial slope = p.coefficient(sc.var, 1);
      Polynomial at_lo = p.substitute(sc.var, sc.lo);
      Polynomial at_hi = p.substitute(sc.var, sc.hi - Polynomial(1));
      if (slope.is_constant()) return nonneg(slope.constant_term() >= 0 ? at_lo : at_hi, s);
      return nonneg(at_lo, s) && nonneg(at_hi, s);
    }
    Rational low = 0;
    for (const auto& [m, c] : p.terms()) {
      Rational t = c;
      for (const auto& [v, e] : m) {
        auto it = domain_.find(v);
        if (it == domain_.end()) return false;
        Rational x = c > 0 ? Rational(it->second.first) : Rational(it->second.second);
        for (int k = 0; k < e; ++k) t *= x;
      }
      low += t;
    }
    return low >= 0;
  }

  RelExpr calls(const Expr& e, const IntervalEnv& env) {
    RelExpr total = leaf(Polynomial());
    for (const auto& a : e.args) total = add(total, calls(a, env));
    if (e.kind != Expr::Kind::call) return total;
    RelExpr r;
    r.callee = e.name;
    if (e.name == f_.name) {
      if (!self_) unsupported("recursion through " + f_.name);
      r.kind = RelExpr::Kind::self;
      const auto& pr = f_.params[self_->position];
      r.call_args = {Polynomial::variable(pr.name) - Polynomial(Rational(self_->shift))};
      return add(total, r);
    }
    r.kind = RelExpr::Kind::call;
    const HirFunction& g = *p_.find(e.name);
    std::set<std::string> gsym;
    for (const auto& n : symbolic_params(g)) gsym.insert(n);
    std::vector<Polynomial> args;
    bool boxed = false;
    for (std::size_t i = 0; i < e.args.size(); ++i) {
      auto a = poly(e.args[i], env);
      if (gsym.contains(g.params[i].name) && !a) boxed = true;
      args.push_back(a.value_or(Polynomial()));
    }
    if (!boxed) r.call_args = std::move(args);
    return add(total, r);
  }

  RelExpr calls(const Cond& c, const IntervalEnv& env) {
    RelExpr r = calls(c.a, env);
    if (c.op != RelOp::nz) r = add(r, calls(c.b, env));
    return r;
  }

  RelExpr part(int stmt, Part p) const { return leaf(pj(c_.part(stmt, p))); }

  Exits list(const std::vector<Stmt>& body, const IntervalEnv& env) {
    Exits acc{leaf(Polynomial()), std::nullopt};
    for (const auto& s : body) {
      if (!acc.ft) break;
      Exits x = stmt(s, env);
      if (x.ret) acc.ret = pick(acc.ret, add(*acc.ft, *x.ret), mode_);
      acc.ft = x.ft ? Opt(add(*acc.ft, *x.ft)) : std::nullopt;
    }
    return acc;
  }

  Exits stmt(const Stmt& s, const IntervalEnv& env) {
    RelExpr own = part(s.id, Part::main);
    switch (s.kind) {
      case StmtKind::var_decl:
      case StmtKind::assign:
      case StmtKind::call: return {add(own, calls(s.value, env)), std::nullopt};
      case StmtKind::store: return {add(add(own, calls(s.index, env)), calls(s.value, env)), std::nullopt};
      case StmtKind::return_:
        return {std::nullopt, s.has_value ? add(own, calls(s.value, env)) : own};
      case StmtKind::if_: {
        RelExpr head = add(own, calls(s.cond, env));
        auto d = settle(s.cond, env);
        Exits out;
        if (!d || *d) {
          Exits t = list(s.body, env);
          out.ft = pick(out.ft, plus(t.ft, part(s.id, Part::then_join)), mode_);
          out.ret = pick(out.ret, t.ret, mode_);
        }
        if (!d || !*d) {
          Exits e = list(s.else_body, env);
          out.ft = pick(out.ft, plus(e.ft, part(s.id, Part::else_join)), mode_);
          out.ret = pick(out.ret, e.ret, mode_);
        }
        return {plus(out.ft, head), plus(out.ret, head)};
      }
      case StmtKind::while_: {
        RelExpr test = add(own, calls(s.cond, env));
        RelExpr entry = part(s.id, Part::entry);
        RelExpr once = add(add(entry, test), part(s.id, Part::exit_jump));
        auto d = settle(s.cond, env);
        if (d && !*d) return {once, std::nullopt};
        Exits b = list(s.body, env);
        Exits out;
        if (mode_ == Bound::upper) {
          std::int64_t k = b.ft ? s.bound : 0;
          RelExpr loops = scale(k, add(add(test, b.ft.value_or(leaf(Polynomial()))), part(s.id, Part::latch)));
          if (!d) out.ft = add(loops, once);
          if (b.ret) out.ret = add(add(add(entry, loops), test), *b.ret);
        } else {
          if (!d) out.ft = once;
          if (b.ret) out.ret = add(add(entry, test), *b.ret);
        }
        return out;
      }
      case StmtKind::for_: return for_stmt(s, env);
    }
    return {};
  }

  Exits for_stmt(const Stmt& s, const IntervalEnv& env) {
    RelExpr entry = add(add(part(s.id, Part::entry), calls(s.value, env)), calls(s.index, env));
    RelExpr iter = part(s.id, Part::iteration);
    auto trips = hir::trip_range(s, env);
    if (!trips) unsupported("loop at line " + std::to_string(s.line) + " has no affine bounds");
    if (trips->hi == 0) return {entry, std::nullopt};
    auto lo = poly(s.value, env);
    auto hi = poly(s.index, env);
    if (!lo || !hi || lo->degree() > 1 || hi->degree() > 1)
      unsupported("loop at line " + std::to_string(s.line) + " has no affine bounds in the parameters");
    if (!nonneg(*lo, scopes_.size())) unsupported("loop index " + s.name + " may be negative");
    if (!nonneg(*hi - *lo, scopes_.size()))
      unsupported("loop at line " + std::to_string(s.line) + " may have a negative trip count");

    scopes_.push_back({s.name, *lo, *hi});
    bool was_symbol = symbols_.contains(s.name);
    symbols_.insert(s.name);
    Exits b = list(s.body, hir::body_env(s, env));
    if (!was_symbol) symbols_.erase(s.name);
    scopes_.pop_back();

    auto sum = [&](RelExpr body) {
      RelExpr r;
      r.kind = RelExpr::Kind::sum;
      r.var = s.name;
      r.lo = *lo;
      r.hi = *hi;
      r.args = {std::move(body)};
      return r;
    };
    Exits out;
    if (b.ft) {
      out.ft = add(entry, sum(add(*b.ft, iter)));
      if (b.ret) out.ret = mode_ == Bound::upper ? add(add(entry, sum(add(*b.ft, iter))), sum(*b.ret)) : entry;
    } else {
      if (trips->lo == 0) out.ft = entry;
      if (b.ret) out.ret = mode_ == Bound::upper ? add(entry, sum(*b.ret)) : entry;
    }
    return out;
  }

  const HirProgram& p_;
  const hir::HirCosts& c_;
  const HirFunction& f_;
  Bound mode_;
  std::optional<SelfShape> self_;
  std::set<std::string> symbols_;
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> domain_;
  std::vector<Scope> scopes_;
};

void collect_calls(const Expr& e, std::vector<const Expr*>& out) {
  for (const auto& a : e.args) collect_calls(a, out);
  if (e.kind == Expr::Kind::call) out.push_back(&e);
}

void collect_calls(const std::vector<Stmt>& body, std::vector<const Expr*>& out) {
  for (const auto& s : body) {
    collect_calls(s.value, out);
    collect_calls(s.index, out);
    collect_calls(s.cond.a, out);
    collect_calls(s.cond.b, out);
    collect_calls(s.body, out);
    collect_calls(s.else_body, out);
  }
}

std::optional<SelfShape> self_shape(const HirFunction& f) {
  std::vector<const Expr*> calls;
  collect_calls(f.body, calls);
  std::optional<SelfShape> shape;
  std::vector<std::string> sym = symbolic_params(f);
  for (const Expr* c : calls) {
    if (c->name != f.name) continue;
    std::optional<SelfShape> here;
    for (std::size_t i = 0; i < c->args.size(); ++i) {
      const Expr& a = c->args[i];
      const std::string& pn = f.params[i].name;
      if (a.kind == Expr::Kind::var && a.name == pn) continue;
      bool dec = a.kind == Expr::Kind::binary && a.op == hir::BinOp::sub && a.args[0].kind == Expr::Kind::var &&
                 a.args[0].name == pn && a.args[1].kind == Expr::Kind::constant && a.args[1].value >= 1 &&
                 a.args[1].value <= 0x7fffffffu;
      if (!dec || here || std::find(sym.begin(), sym.end(), pn) == sym.end())
        unsupported("recursive call to " + f.name + " at line " + std::to_string(c->line) +
                    " is not of the form f(..., n - k, ...)");
      here = SelfShape{i, static_cast<std::int64_t>(a.args[1].value)};
    }
    if (!here) unsupported("recursive call to " + f.name + " does not decrease a parameter");
    if (shape && (shape->position != here->position || shape->shift != here->shift))
      unsupported("recursive calls to " + f.name + " decrease by different amounts");
    shape = here;
  }
  return shape;
}

// Callee-first order; mutual recursion is rejected.
std::vector<std::string> call_order(const HirProgram& p) {
  std::map<std::string, std::set<std::string>> edges;
  for (const auto& f : p.functions) {
    std::vector<const Expr*> calls;
    collect_calls(f.body, calls);
    for (const Expr* c : calls)
      if (c->name != f.name) edges[f.name].insert(c->name);
  }
  std::vector<std::string> order;
  std::map<std::string, int> state;
  std::function<void(const std::string&)> visit = [&](const std::string& n) {
    if (state[n] == 2) return;
    if (state[n] == 1) unsupported("mutual recursion through " + n);
    state[n] = 1;
    for (const auto& m : edges[n]) visit(m);
    state[n] = 2;
    order.push_back(n);
  };
  for (const auto& f : p.functions) visit(f.name);
  return order;
}

}  // namespace

std::vector<CostRelation> extract_relations(const HirProgram& program, const hir::HirCosts& costs) {
  call_order(program);
  std::vector<CostRelation> out;
  for (const auto& f : program.functions) {
    CostRelation r;
    r.function = f.name;
    r.params = symbolic_params(f);
    for (const auto& pr : f.params) {
      r.positional.push_back(pr.name);
      r.domains[pr.name] = {pr.lo, pr.hi};
    }
    IntervalEnv env = hir::entry_env(f);
    auto shape = self_shape(f);
    if (!shape) {
      r.upper = Extractor(program, costs, f, Bound::upper, std::nullopt).function(env);
      r.lower = Extractor(program, costs, f, Bound::lower, std::nullopt).function(env);
    } else {
      const hir::Param& n = f.params[shape->position];
      r.recursive = true;
      r.rec_param = n.name;
      r.rec_lo = n.lo;
      r.shift = shape->shift;
      if (n.lo + shape->shift > n.hi) unsupported("recursion in " + f.name + " cannot stay inside the domain of " + n.name);
      IntervalEnv base = env, step = env;
      base[n.name] = {n.lo, n.lo + shape->shift - 1};
      step[n.name] = {n.lo + shape->shift, n.hi};
      for (Bound b : {Bound::upper, Bound::lower}) {
        RelExpr be = Extractor(program, costs, f, b, shape).function(base);
        if (contains_self(be))
          unsupported("recursive call in " + f.name + " is not ruled out for " + n.name + " < " +
                      std::to_string(n.lo + shape->shift));
        RelExpr se = Extractor(program, costs, f, b, shape).function(step);
        (b == Bound::upper ? r.base_upper : r.base_lower) = std::move(be);
        (b == Bound::upper ? r.upper : r.lower) = std::move(se);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

struct Partial {
  Polynomial poly;
  int self = 0;
};

Polynomial box_bound(const Polynomial& p, const Domains& d, Bound mode) {
  Rational total = 0;
  for (const auto& [m, c] : p.terms()) {
    Rational t = c;
    for (const auto& [v, e] : m) {
      const auto& [lo, hi] = d.at(v);
      bool high = (c > 0) == (mode == Bound::upper);
      Rational x = high ? Rational(hi) : Rational(lo);
      for (int k = 0; k < e; ++k) t *= x;
    }
    total += t;
  }
  return Polynomial(total);
}

class Solver {
 public:
  Solver(const std::map<std::string, CostFunction>& solved, const std::map<std::string, std::vector<std::string>>& positional,
         Bound mode)
      : solved_(solved), positional_(positional), mode_(mode) {}

  Partial eval(const RelExpr& e) {
    switch (e.kind) {
      case RelExpr::Kind::poly: return {e.poly, 0};
      case RelExpr::Kind::add: {
        Partial acc;
        for (const auto& a : e.args) {
          Partial x = eval(a);
          acc.poly += x.poly;
          acc.self += x.self;
        }
        if (acc.self > 1) unsupported("more than one recursive call on a path");
        return acc;
      }
      case RelExpr::Kind::max:
      case RelExpr::Kind::min: {
        Partial acc = eval(e.args[0]);
        for (std::size_t i = 1; i < e.args.size(); ++i) {
          Partial x = eval(e.args[i]);
          acc.poly = mode_ == Bound::upper ? coeff_max(acc.poly, x.poly) : coeff_min(acc.poly, x.poly);
          acc.self = mode_ == Bound::upper ? std::max(acc.self, x.self) : std::min(acc.self, x.self);
        }
        return acc;
      }
      case RelExpr::Kind::scale: {
        Partial x = eval(e.args[0]);
        if (x.self) unsupported("recursive call inside a loop");
        return {e.poly * x.poly, 0};
      }
      case RelExpr::Kind::sum: {
        Partial x = eval(e.args[0]);
        if (x.self) unsupported("recursive call inside a loop");
        return {sum_over(x.poly, e.var, e.lo, e.hi), 0};
      }
      case RelExpr::Kind::call: {
        const CostFunction& g = solved_.at(e.callee);
        const Polynomial& body = mode_ == Bound::upper ? g.upper : g.lower;
        if (e.call_args.empty()) return {box_bound(body, g.domains, mode_), 0};
        // Rename first so that substitution is simultaneous.
        Polynomial p = body;
        const std::vector<std::string>& order = positional_.at(e.callee);
        for (std::size_t i = 0; i < order.size(); ++i)
          p = p.substitute(order[i], Polynomial::variable("\x02" + std::to_string(i)));
        for (std::size_t i = 0; i < order.size(); ++i) p = p.substitute("\x02" + std::to_string(i), e.call_args[i]);
        return {p, 0};
      }
      case RelExpr::Kind::self: return {Polynomial(), 1};
    }
    return {};
  }

 private:
  const std::map<std::string, CostFunction>& solved_;
  const std::map<std::string, std::vector<std::string>>& positional_;
  Bound mode_;
};

}  // namespace

std::vector<CostFunction> solve(const std::vector<CostRelation>& relations) {
  std::map<std::string, const CostRelation*> by_name;
  std::map<std::string, std::vector<std::string>> positional;
  for (const auto& r : relations) {
    by_name[r.function] = &r;
    positional[r.function] = r.positional;
  }

  std::map<std::string, std::set<std::string>> edges;
  std::function<void(const std::string&, const RelExpr&)> scan = [&](const std::string& f, const RelExpr& e) {
    if (e.kind == RelExpr::Kind::call) edges[f].insert(e.callee);
    for (const auto& a : e.args) scan(f, a);
  };
  for (const auto& r : relations)
    for (const RelExpr* e : {&r.upper, &r.lower, &r.base_upper, &r.base_lower}) scan(r.function, *e);
  std::vector<std::string> order;
  std::map<std::string, int> state;
  std::function<void(const std::string&)> visit = [&](const std::string& n) {
    if (state[n] == 2) return;
    if (state[n] == 1) unsupported("mutual recursion through " + n);
    if (!by_name.contains(n)) throw Error("no relation for function " + n);
    state[n] = 1;
    for (const auto& m : edges[n]) visit(m);
    state[n] = 2;
    order.push_back(n);
  };
  for (const auto& r : relations) visit(r.function);

  std::map<std::string, CostFunction> solved;
  for (const auto& name : order) {
    const CostRelation& r = *by_name.at(name);
    CostFunction cf;
    cf.function = r.function;
    cf.params = r.params;
    cf.domains = r.domains;
    for (Bound mode : {Bound::upper, Bound::lower}) {
      Solver s(solved, positional, mode);
      Partial step = s.eval(mode == Bound::upper ? r.upper : r.lower);
      Polynomial result;
      if (!r.recursive) {
        result = step.poly;
      } else {
        Partial base = s.eval(mode == Bound::upper ? r.base_upper : r.base_lower);
        const std::string& n = r.rec_param;
        // Base case value: worst / best over the k base points.
        Polynomial b = base.poly.substitute(n, Polynomial(Rational(r.rec_lo)));
        for (std::int64_t j = 1; j < r.shift; ++j) {
          Polynomial bj = base.poly.substitute(n, Polynomial(Rational(r.rec_lo + j)));
          b = mode == Bound::upper ? coeff_max(b, bj) : coeff_min(b, bj);
        }
        if (step.self == 0) {
          result = mode == Bound::upper ? coeff_max(b, step.poly) : coeff_min(b, step.poly);
        } else if (r.shift == 1) {
          std::string i = "\x03" + n;
          result = b + sum_over(step.poly.substitute(n, Polynomial::variable(i)), i, Polynomial(Rational(r.rec_lo + 1)),
                                Polynomial::variable(n) + Polynomial(1));
        } else if (mode == Bound::upper) {
          std::string i = "\x03" + n;
          result = b + sum_over(step.poly.substitute(n, Polynomial::variable(i)), i,
                                Polynomial(Rational(r.rec_lo + r.shift)), Polynomial::variable(n) + Polynomial(1));
          cf.notes.push_back("recursion step " + std::to_string(r.shift) + " > 1: upper bound sums every step point");
        } else {
          result = b;
          cf.notes.push_back("recursion step " + std::to_string(r.shift) + " > 1: lower bound counts the base case only");
        }
      }
      (mode == Bound::upper ? cf.upper : cf.lower) = std::move(result);
    }
    solved[name] = std::move(cf);
  }
  std::vector<CostFunction> out;
  for (const auto& r : relations) out.push_back(solved.at(r.function));
  return out;
}

Rational eval_cost(const Polynomial& f, const Bindings& at) {
  std::map<std::string, Rational> values;
  for (const auto& [name, v] : at) {
    if (v < 0) throw ValidationError(name, "parameters must be non-negative");
    values[name] = Rational(v);
  }
  return f.eval(values);
}

Rational eval_cost(const CostFunction& f, Bound which, const Bindings& at) {
  for (const auto& [name, v] : at) {
    auto it = f.domains.find(name);
    if (it != f.domains.end() && (v < it->second.first || v > it->second.second))
      throw ValidationError(name, "value " + std::to_string(v) + " outside the declared domain");
  }
  return eval_cost(which == Bound::upper ? f.upper : f.lower, at);
}

// ---------------------------------------------------------------------------
// Rendering

std::string RelExpr::to_string() const {
  auto join = [&](const std::string& sep) {
    std::string s;
    for (std::size_t i = 0; i < args.size(); ++i) s += (i ? sep : "") + args[i].to_string();
    return s;
  };
  switch (kind) {
    case Kind::poly: return poly.terms().size() > 1 ? "(" + poly.to_string() + ")" : poly.to_string();
    case Kind::add: return join(" + ");
    case Kind::max: return "max(" + join(", ") + ")";
    case Kind::min: return "min(" + join(", ") + ")";
    case Kind::scale: return poly.to_string() + "*(" + join("") + ")";
    case Kind::sum:
      return "sum[" + var + " = " + lo.to_string() + " .. " + (hi - Polynomial(1)).to_string() + "](" + join("") + ")";
    case Kind::call: {
      if (call_args.empty()) return "C_" + callee + "(domain bound)";
      std::string s = "C_" + callee + "(";
      for (std::size_t i = 0; i < call_args.size(); ++i) s += (i ? ", " : "") + call_args[i].to_string();
      return s + ")";
    }
    case Kind::self: return "C_" + callee + "(" + (call_args.empty() ? "" : call_args[0].to_string()) + ")";
  }
  return "";
}

std::string CostRelation::to_string() const {
  std::string args;
  for (std::size_t i = 0; i < params.size(); ++i) args += (i ? ", " : "") + params[i];
  std::string head = "C_" + function + "(" + args + ")";
  if (!recursive) return head + " <= " + upper.to_string() + "\n" + head + " >= " + lower.to_string() + "\n";
  std::string base = " for " + rec_param + " < " + std::to_string(rec_lo + shift);
  std::string step = " for " + rec_param + " >= " + std::to_string(rec_lo + shift);
  return head + " <= " + base_upper.to_string() + base + "\n" + head + " <= " + upper.to_string() + step + "\n" + head +
         " >= " + base_lower.to_string() + base + "\n" + head + " >= " + lower.to_string() + step + "\n";
}

namespace {

nlohmann::ordered_json poly_json(const Polynomial& p) {
  nlohmann::ordered_json j;
  j["closed_form"] = p.to_string();
  j["terms"] = nlohmann::ordered_json::array();
  for (const auto& [m, c] : p.terms()) {
    nlohmann::ordered_json t;
    t["coefficient"] = rational_string(c);
    t["monomial"] = nlohmann::ordered_json::object();
    for (const auto& [v, e] : m) t["monomial"][v] = e;
    j["terms"].push_back(t);
  }
  return j;
}

}  // namespace

std::string cost_functions_json(const std::vector<CostFunction>& fns) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& f : fns) {
    nlohmann::ordered_json j;
    j["function"] = f.function;
    j["params"] = f.params;
    j["domains"] = nlohmann::ordered_json::object();
    for (const auto& [name, d] : f.domains) j["domains"][name] = {d.first, d.second};
    j["unit"] = "pJ";
    j["upper"] = poly_json(f.upper);
    j["lower"] = poly_json(f.lower);
    j["notes"] = f.notes;
    out.push_back(j);
  }
  return out.dump(2) + "\n";
}

std::string cost_functions_text(const std::vector<CostFunction>& fns) {
  std::string out;
  for (const auto& f : fns) {
    std::string args;
    for (std::size_t i = 0; i < f.params.size(); ++i) args += (i ? ", " : "") + f.params[i];
    std::string head = f.function + "(" + args + ")";
    out += head + " upper [pJ]: " + f.upper.to_string() + "\n";
    out += head + " lower [pJ]: " + f.lower.to_string() + "\n";
    for (const auto& n : f.notes) out += "  note: " + n + "\n";
  }
  return out;
}

}  // namespace wattlens::parametric
