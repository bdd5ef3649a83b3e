#include <functional>
#include <set>
#include <tuple>

#include "wattlens/errors.hpp"
#include "wattlens/hir.hpp"

namespace wattlens::hir {

namespace {

constexpr std::uint32_t kSign = 0x80000000u;

bool less32(std::uint32_t a, std::uint32_t b) { return static_cast<std::int32_t>(a - b) < 0; }

std::optional<std::uint32_t> fold(const Expr& e) {
  if (e.kind == Expr::Kind::constant) return e.value;
  if (e.kind != Expr::Kind::binary) return std::nullopt;
  auto a = fold(e.args[0]);
  auto b = fold(e.args[1]);
  if (!a || !b) return std::nullopt;
  switch (e.op) {
    case BinOp::add: return *a + *b;
    case BinOp::sub: return *a - *b;
    case BinOp::mul: return *a * *b;
    case BinOp::band: return *a & *b;
    case BinOp::bxor: return *a ^ *b;
    case BinOp::shl: return *a << (*b & 31u);
  }
  return std::nullopt;
}

std::optional<bool> fold(const Cond& c) {
  auto a = fold(c.a);
  if (!a) return std::nullopt;
  if (c.op == RelOp::nz) return *a != 0;
  auto b = fold(c.b);
  if (!b) return std::nullopt;
  switch (c.op) {
    case RelOp::lt: return less32(*a, *b);
    case RelOp::le: return !less32(*b, *a);
    case RelOp::gt: return less32(*b, *a);
    case RelOp::ge: return !less32(*a, *b);
    case RelOp::eq: return *a == *b;
    case RelOp::ne: return *a != *b;
    case RelOp::nz: break;
  }
  return std::nullopt;
}

using Attr = std::pair<int, Part>;

// Trip count of a for loop whose bounds fold to constants.
std::optional<std::int64_t> known_trips(const Stmt& s) {
  auto lo = fold(s.value), hi = fold(s.index);
  if (!lo || !hi) return std::nullopt;
  return std::max<std::int64_t>(0, static_cast<std::int32_t>(*hi - *lo));
}

struct Line {
  bool label = false;
  std::string text;  // label name, or instruction text before the target
  std::string target;
  std::string bound;
  int stmt = 0;
  Part part = Part::main;
};

class FunctionCompiler {
 public:
  FunctionCompiler(const HirProgram& p, const HirFunction& f) : p_(p), f_(f) {}

  std::vector<Line> lines;

  void run() {
    for (const auto& pr : f_.params) reg_[pr.name] = static_cast<int>(reg_.size());
    for (const auto& [name, range] : entry_env(f_)) fixed_.insert(name);
    collect(f_.body, 0);
    hidden_base_ = static_cast<int>(reg_.size());
    temp_base_ = hidden_base_ + max_depth_;
    top_ = temp_base_;
    high_ = top_;
    bool ft = stmts(f_.body, entry_env(f_));
    if (ft) {
      cur_ = {f_.glue_id, Part::main};
      emit("LDC r0, 0");
      emit(terminator());
    }
    if (high_ > kRegisterCount)
      throw UnsupportedError("function " + f_.name + " needs " + std::to_string(high_) + " registers, only " +
                             std::to_string(kRegisterCount) + " available");
  }

 private:
  void collect(const std::vector<Stmt>& body, int depth) {
    for (const auto& s : body) {
      if ((s.kind == StmtKind::var_decl || s.kind == StmtKind::for_) && !reg_.contains(s.name))
        reg_[s.name] = static_cast<int>(reg_.size());
      int d = depth + (s.kind == StmtKind::for_ && !limit_reg(s) ? 1 : 0);
      max_depth_ = std::max(max_depth_, d);
      collect(s.body, d);
      collect(s.else_body, depth);
    }
  }

  // A loop limit held in a parameter that is never written needs no copy.
  std::optional<int> limit_reg(const Stmt& loop) const {
    if (loop.index.kind == Expr::Kind::var && fixed_.contains(loop.index.name)) return reg_.at(loop.index.name);
    return std::nullopt;
  }

  static std::string r(int n) { return "r" + std::to_string(n); }
  std::string terminator() const { return f_.name == "main" ? "HALT" : "RET"; }

  int temp() {
    int t = top_++;
    high_ = std::max(high_, top_);
    return t;
  }

  std::string label() { return "L" + std::to_string(next_label_++); }
  void place(const std::string& l) { lines.push_back({true, l, "", "", 0, Part::main}); }
  void emit(const std::string& text, const std::string& target = "", const std::string& bound = "") {
    lines.push_back({false, text, target, bound, cur_.first, cur_.second});
  }
  void ldc(int dst, std::uint32_t v) { emit("LDC " + r(dst) + ", " + std::to_string(v)); }

  // Register holding the value of `e`; may allocate temporaries.
  int operand(const Expr& e) {
    if (e.kind == Expr::Kind::var) return reg_.at(e.name);
    int t = temp();
    gen(e, t);
    return t;
  }

  void gen(const Expr& e, int dst) {
    int saved = top_;
    if (auto v = fold(e)) {
      ldc(dst, *v);
      return;
    }
    switch (e.kind) {
      case Expr::Kind::constant: break;
      case Expr::Kind::var: {
        int s = reg_.at(e.name);
        if (s != dst) emit("AND " + r(dst) + ", " + r(s) + ", " + r(s));
        break;
      }
      case Expr::Kind::index: {
        int a = address(e.name, e.args[0]);
        emit("LDW " + r(dst) + ", " + r(a));
        break;
      }
      case Expr::Kind::binary: {
        int a;
        if (e.args[0].kind != Expr::Kind::var && !reads(e.args[1], dst)) {
          gen(e.args[0], dst);
          top_ = saved;
          a = dst;
        } else {
          a = operand(e.args[0]);
        }
        int b = operand(e.args[1]);
        static const char* names[] = {"ADD", "SUB", "MUL", "AND", "XOR", "SHL"};
        emit(std::string(names[static_cast<int>(e.op)]) + " " + r(dst) + ", " + r(a) + ", " + r(b));
        break;
      }
      case Expr::Kind::call: {
        int k = top_;
        std::size_t n = std::max<std::size_t>(1, e.args.size());
        for (std::size_t i = 0; i < n; ++i) temp();
        for (std::size_t i = 0; i < e.args.size(); ++i) gen(e.args[i], k + static_cast<int>(i));
        emit("CALL " + e.name + ", " + r(k));
        if (dst != k) emit("AND " + r(dst) + ", " + r(k) + ", " + r(k));
        break;
      }
    }
    top_ = saved;
  }

  bool reads(const Expr& e, int reg) const {
    if (e.kind == Expr::Kind::var) return reg_.at(e.name) == reg;
    for (const auto& a : e.args)
      if (reads(a, reg)) return true;
    return false;
  }

  int address(const std::string& array, const Expr& index) {
    const ArrayDecl* a = p_.array(array);
    if (auto c = fold(index)) {
      int t = temp();
      ldc(t, static_cast<std::uint32_t>(a->base) + *c);
      return t;
    }
    if (a->base == 0) return operand(index);
    int i = operand(index);
    int t = temp();
    ldc(t, static_cast<std::uint32_t>(a->base));
    emit("ADD " + r(t) + ", " + r(t) + ", " + r(i));
    return t;
  }

  // Register that is nonzero iff the condition holds (positive) or fails.
  std::pair<int, bool> test(const Cond& c) {
    auto sign_of = [&](const Expr& x, const Expr& y) {
      int a = operand(x);
      int b = operand(y);
      int t = temp();
      emit("SUB " + r(t) + ", " + r(a) + ", " + r(b));
      int s = temp();
      ldc(s, kSign);
      emit("AND " + r(t) + ", " + r(t) + ", " + r(s));
      return t;
    };
    switch (c.op) {
      case RelOp::nz: return {operand(c.a), true};
      case RelOp::lt: return {sign_of(c.a, c.b), true};
      case RelOp::gt: return {sign_of(c.b, c.a), true};
      case RelOp::le: return {sign_of(c.b, c.a), false};
      case RelOp::ge: return {sign_of(c.a, c.b), false};
      case RelOp::eq:
      case RelOp::ne: {
        int a = operand(c.a);
        int b = operand(c.b);
        int t = temp();
        emit("XOR " + r(t) + ", " + r(a) + ", " + r(b));
        return {t, c.op == RelOp::ne};
      }
    }
    return {0, true};
  }

  bool stmts(const std::vector<Stmt>& body, const IntervalEnv& env) {
    for (const auto& s : body)
      if (!stmt(s, env)) return false;
    return true;
  }

  // Returns whether control can fall through past `s`.
  bool stmt(const Stmt& s, const IntervalEnv& env) {
    cur_ = {s.id, Part::main};
    int saved = top_;
    bool ft = true;
    switch (s.kind) {
      case StmtKind::var_decl:
      case StmtKind::assign: gen(s.value, reg_.at(s.name)); break;
      case StmtKind::store: {
        int a = address(s.name, s.index);
        int v = operand(s.value);
        emit("STW " + r(v) + ", " + r(a));
        break;
      }
      case StmtKind::call: gen(s.value, temp()); break;
      case StmtKind::return_:
        if (s.has_value)
          gen(s.value, 0);
        else
          ldc(0, 0);
        emit(terminator());
        ft = false;
        break;
      case StmtKind::if_: ft = if_stmt(s, env); break;
      case StmtKind::while_: ft = while_stmt(s, env); break;
      case StmtKind::for_: ft = for_stmt(s, env, depth_); break;
    }
    top_ = saved;
    return ft;
  }

  bool if_stmt(const Stmt& s, const IntervalEnv& env) {
    if (auto v = fold(s.cond)) return stmts(*v ? s.body : s.else_body, env);
    auto [t, positive] = test(s.cond);
    std::string join = label();
    bool ft = false;
    auto jump_join = [&](Part part) {
      cur_ = {s.id, part};
      emit("JMP ", join);
    };
    if (positive) {
      std::string then = label();
      emit("BRT " + r(t) + ", ", then);
      top_ = temp_floor();
      bool e = stmts(s.else_body, env);
      if (e) jump_join(Part::else_join);
      place(then);
      ft = stmts(s.body, env) || e;
    } else if (s.has_else) {
      std::string other = label();
      emit("BRT " + r(t) + ", ", other);
      top_ = temp_floor();
      bool th = stmts(s.body, env);
      if (th) jump_join(Part::then_join);
      place(other);
      ft = stmts(s.else_body, env) || th;
    } else {
      emit("BRT " + r(t) + ", ", join);
      top_ = temp_floor();
      stmts(s.body, env);
      ft = true;
    }
    if (ft) place(join);
    return ft;
  }

  bool while_stmt(const Stmt& s, const IntervalEnv& env) {
    auto v = fold(s.cond);
    if (v && !*v) return true;
    std::string head = label();
    std::string exit = label();
    if (!lines.empty() && lines.back().label) {
      // Keep the loop header from sharing a block with an enclosing label.
      cur_ = {s.id, Part::entry};
      emit("JMP ", head);
    }
    place(head);
    cur_ = {s.id, Part::main};
    bool exits = true;
    if (v) {
      exits = false;
    } else {
      auto [t, positive] = test(s.cond);
      if (positive) {
        std::string body = label();
        emit("BRT " + r(t) + ", ", body);
        cur_ = {s.id, Part::exit_jump};
        emit("JMP ", exit);
        place(body);
      } else {
        emit("BRT " + r(t) + ", ", exit);
      }
      top_ = temp_floor();
    }
    if (stmts(s.body, env)) {
      cur_ = {s.id, Part::latch};
      emit("JMP ", head, "@bound " + std::to_string(s.bound));
    }
    if (exits) place(exit);
    return exits;
  }

  bool for_stmt(const Stmt& s, const IntervalEnv& env, int depth) {
    auto trips = trip_range(s, env);
    if (!trips)
      throw UnsupportedError("for loop at line " + std::to_string(s.line) +
                             ": bounds must be affine in parameters and enclosing loop indices");
    int i = reg_.at(s.name);
    cur_ = {s.id, Part::entry};
    auto known = known_trips(s);
    if (known && *known == 0) {
      gen(s.value, i);
      return true;
    }
    auto fixed = limit_reg(s);
    int h = fixed ? *fixed : hidden_base_ + depth;
    if (!fixed) gen(s.index, h);
    gen(s.value, i);
    std::string body = label();
    std::string exit = label();
    bool guarded = !(known && *known >= 1);
    if (guarded) {
      int t = temp();
      ldc(t, 1);
      emit("SUB " + r(t) + ", " + r(h) + ", " + r(t));
      emit("SUB " + r(t) + ", " + r(t) + ", " + r(i));
      int sg = temp();
      ldc(sg, kSign);
      emit("AND " + r(t) + ", " + r(t) + ", " + r(sg));
      emit("BRT " + r(t) + ", ", exit);
      top_ = temp_floor();
    }
    place(body);
    if (!fixed) ++depth_;
    bool ft = stmts(s.body, body_env(s, env));
    if (!fixed) --depth_;
    if (ft) {
      cur_ = {s.id, Part::iteration};
      int t = temp();
      ldc(t, 1);
      emit("ADD " + r(i) + ", " + r(i) + ", " + r(t));
      emit("SUB " + r(t) + ", " + r(i) + ", " + r(h));
      int sg = temp();
      ldc(sg, kSign);
      emit("AND " + r(t) + ", " + r(t) + ", " + r(sg));
      std::int64_t tmin = known ? *known : trips->lo;
      std::int64_t tmax = known ? *known : trips->hi;
      std::string b = "@bound " + std::to_string(std::max<std::int64_t>(0, tmin - 1)) + ".." +
                      std::to_string(std::max<std::int64_t>(0, tmax - 1));
      emit("BRT " + r(t) + ", ", body, b);
      top_ = temp_floor();
    }
    if (guarded || ft) place(exit);
    return guarded || ft;
  }

  // Temporaries never outlive a statement; a branch releases the ones
  // used by its test.
  int temp_floor() const { return temp_base_; }

  const HirProgram& p_;
  const HirFunction& f_;
  std::map<std::string, int> reg_;
  std::set<std::string> fixed_;
  int hidden_base_ = 0;
  int temp_base_ = 0;
  int max_depth_ = 0;
  int depth_ = 0;
  int top_ = 0;
  int high_ = 0;
  int next_label_ = 0;
  Attr cur_{0, Part::main};
};

}  // namespace

Compiled compile(const HirProgram& program) {
  std::vector<const HirFunction*> order;
  order.push_back(program.find("main"));
  for (const auto& f : program.functions)
    if (f.name != "main") order.push_back(&f);

  std::string text;
  std::map<int, Attr> attr_by_line;
  int line_no = 0;
  auto put = [&](const std::string& s) {
    text += s + "\n";
    ++line_no;
  };
  const HirFunction& main = *order.front();
  for (std::size_t i = 0; i < main.params.size(); ++i)
    put("@input r" + std::to_string(i) + " " + std::to_string(main.params[i].lo) + ".." + std::to_string(main.params[i].hi));
  put("@entry main");

  for (const HirFunction* f : order) {
    FunctionCompiler fc(program, *f);
    fc.run();
    std::string head = "func " + f->name;
    for (std::size_t i = 0; i < f->params.size(); ++i) head += " r" + std::to_string(i);
    put(head);
    std::map<std::string, std::string> alias;
    std::string last_label;
    bool after_label = false;
    for (const Line& l : fc.lines) {
      if (l.label) {
        if (after_label)
          alias[l.text] = last_label;
        else
          last_label = l.text;
        after_label = true;
      } else {
        after_label = false;
      }
    }
    after_label = false;
    for (const Line& l : fc.lines) {
      if (l.label) {
        if (!alias.contains(l.text)) put(l.text + ":");
        continue;
      }
      if (!l.bound.empty()) put("  " + l.bound);
      std::string tgt = l.target;
      if (auto it = alias.find(tgt); it != alias.end()) tgt = it->second;
      put("  " + l.text + tgt);
      attr_by_line[line_no] = {l.stmt, l.part};
    }
  }

  Compiled out;
  out.program = parse_program(text);
  for (const auto& fn : out.program.functions)
    for (const auto& b : fn.blocks)
      for (std::size_t k = 0; k < b.instructions.size(); ++k) {
        auto it = attr_by_line.find(b.instructions[k].line);
        if (it == attr_by_line.end()) continue;
        out.mapping.entries.push_back({it->second.first, it->second.second, fn.name, b.label, static_cast<int>(k)});
      }
  return out;
}

std::vector<std::string> check_mapping(const Program& program, const MappingTable& mapping) {
  std::vector<std::string> diags;
  std::map<std::tuple<std::string, std::string, int>, int> seen;
  for (const auto& e : mapping.entries) ++seen[{e.function, e.block, e.index}];
  for (const auto& fn : program.functions)
    for (const auto& b : fn.blocks)
      for (std::size_t k = 0; k < b.instructions.size(); ++k) {
        auto key = std::make_tuple(fn.name, b.label, static_cast<int>(k));
        auto it = seen.find(key);
        int n = it == seen.end() ? 0 : it->second;
        if (n != 1)
          diags.push_back(fn.name + ":" + b.label + "[" + std::to_string(k) + "] mapped " + std::to_string(n) + " times");
        if (it != seen.end()) seen.erase(it);
      }
  for (const auto& [key, n] : seen)
    diags.push_back(std::get<0>(key) + ":" + std::get<1>(key) + "[" + std::to_string(std::get<2>(key)) +
                    "] is not an instruction");
  return diags;
}

Energy HirCosts::part(int stmt, Part p) const {
  auto it = parts.find({stmt, p});
  return it == parts.end() ? Energy{} : it->second;
}

Energy HirCosts::stmt(int s) const {
  Energy e;
  for (const auto& [key, v] : parts)
    if (key.first == s) e += v;
  return e;
}

HirCosts lift_model(const EnergyModel& model, const Program& program, const MappingTable& mapping) {
  HirCosts c;
  for (const auto& e : mapping.entries) {
    int f = program.function_index(e.function);
    if (f < 0) throw Error("mapping names unknown function " + e.function);
    const Function& fn = program.functions[static_cast<std::size_t>(f)];
    int b = fn.block_index(e.block);
    if (b < 0 || e.index < 0 || e.index >= static_cast<int>(fn.blocks[static_cast<std::size_t>(b)].instructions.size()))
      throw Error("mapping names unknown instruction " + e.function + ":" + e.block);
    Opcode op = fn.blocks[static_cast<std::size_t>(b)].instructions[static_cast<std::size_t>(e.index)].op;
    c.parts[{e.stmt, e.part}] += instruction_energy(model, op, 1) * isa_spec(op).issue_cycles;
  }
  return c;
}

// ---------------------------------------------------------------------------
// HIR-level bound

namespace {

// Worst-case cost of control leaving a statement list by falling through
// and by returning; nullopt when that exit is impossible.
struct Exits {
  std::optional<Energy> ft;
  std::optional<Energy> ret;
};

std::optional<Energy> opt_max(std::optional<Energy> a, std::optional<Energy> b) {
  if (!a) return b;
  if (!b) return a;
  return std::max(*a, *b);
}

std::optional<Energy> plus(std::optional<Energy> a, Energy b) {
  if (!a) return std::nullopt;
  return *a + b;
}

class HirBound {
 public:
  HirBound(const HirProgram& p, const HirCosts& c) : p_(p), c_(c) {}

  Energy function(const std::string& name) {
    if (auto it = memo_.find(name); it != memo_.end()) return it->second;
    if (active_.contains(name)) throw AnalysisError({"recursion through " + name + " has no static bound"});
    active_.insert(name);
    const HirFunction& f = *p_.find(name);
    Exits x = list(f.body, entry_env(f));
    Energy e = opt_max(plus(x.ft, c_.part(f.glue_id, Part::main)), x.ret).value_or(Energy{});
    active_.erase(name);
    memo_[name] = e;
    return e;
  }

  std::map<std::string, Energy> memo_;
  std::set<std::string> pruned_;

 private:
  // Constant conditions were already folded by the compiler; only interval
  // decisions make the two levels differ, so they are reported.
  std::optional<bool> settle(const Stmt& s, const IntervalEnv& env) {
    if (auto v = fold(s.cond)) return v;
    auto v = decide(s.cond, env);
    if (v)
      pruned_.insert("line " + std::to_string(s.line) + ": condition always " + (*v ? "true" : "false") +
                     " over the parameter domains");
    return v;
  }

  Energy calls(const Expr& e) {
    Energy total;
    if (e.kind == Expr::Kind::call) total += function(e.name);
    for (const auto& a : e.args) total += calls(a);
    return total;
  }
  Energy calls(const Cond& c) { return calls(c.a) + (c.op == RelOp::nz ? Energy{} : calls(c.b)); }

  Exits list(const std::vector<Stmt>& body, const IntervalEnv& env) {
    Exits acc{Energy{}, std::nullopt};
    for (const auto& s : body) {
      if (!acc.ft) break;
      Exits x = stmt(s, env);
      acc.ret = opt_max(acc.ret, x.ret ? std::optional(*acc.ft + *x.ret) : std::nullopt);
      acc.ft = x.ft ? std::optional(*acc.ft + *x.ft) : std::nullopt;
    }
    return acc;
  }

  Exits stmt(const Stmt& s, const IntervalEnv& env) {
    Energy own = c_.part(s.id, Part::main);
    switch (s.kind) {
      case StmtKind::var_decl:
      case StmtKind::assign:
      case StmtKind::call: return {own + calls(s.value), std::nullopt};
      case StmtKind::store: return {own + calls(s.index) + calls(s.value), std::nullopt};
      case StmtKind::return_: return {std::nullopt, own + (s.has_value ? calls(s.value) : Energy{})};
      case StmtKind::if_: {
        Energy head = own + calls(s.cond);
        auto d = settle(s, env);
        Exits out;
        if (!d || *d) {
          Exits t = list(s.body, env);
          out.ft = opt_max(out.ft, plus(t.ft, c_.part(s.id, Part::then_join)));
          out.ret = opt_max(out.ret, t.ret);
        }
        if (!d || !*d) {
          Exits e = list(s.else_body, env);
          out.ft = opt_max(out.ft, plus(e.ft, c_.part(s.id, Part::else_join)));
          out.ret = opt_max(out.ret, e.ret);
        }
        return {plus(out.ft, head), plus(out.ret, head)};
      }
      case StmtKind::while_: {
        Energy test = own + calls(s.cond);
        Energy entry = c_.part(s.id, Part::entry);
        Energy latch = c_.part(s.id, Part::latch);
        Energy exit = c_.part(s.id, Part::exit_jump);
        auto d = settle(s, env);
        if (d && !*d) return {entry + test + exit, std::nullopt};
        Exits b = list(s.body, env);
        std::int64_t k = s.bound;
        Exits out;
        if (!b.ft) k = 0;
        Energy loops = k * (test + b.ft.value_or(Energy{}) + latch);
        if (!d) out.ft = entry + loops + test + exit;
        if (b.ret) out.ret = entry + loops + test + *b.ret;
        return out;
      }
      case StmtKind::for_: {
        Energy entry = c_.part(s.id, Part::entry) + calls(s.value) + calls(s.index);
        Energy iter = c_.part(s.id, Part::iteration);
        auto trips = trip_range(s, env);
        if (!trips) throw AnalysisError({"for loop at line " + std::to_string(s.line) + " has no static trip bound"});
        if (auto k = known_trips(s)) trips = Interval{*k, *k};
        if (trips->hi == 0) return {entry, std::nullopt};
        Exits b = list(s.body, body_env(s, env));
        std::int64_t t = trips->hi;
        Exits out;
        if (b.ft) {
          out.ft = entry + t * (*b.ft + iter);
          if (b.ret) out.ret = entry + (t - 1) * (*b.ft + iter) + *b.ret;
        } else {
          if (trips->lo == 0) out.ft = entry;
          if (b.ret) out.ret = entry + *b.ret;
        }
        return out;
      }
    }
    return {};
  }

  const HirProgram& p_;
  const HirCosts& c_;
  std::set<std::string> active_;
};

}  // namespace

EnergyBound hir_wcec(const HirProgram& program, const HirCosts& costs) {
  HirBound hb(program, costs);
  EnergyBound out;
  out.kind = BoundKind::upper;
  out.n_threads = 1;
  out.level = 1;
  out.value = hb.function("main");
  for (const auto& f : program.functions) out.per_invocation[f.name] = hb.function(f.name);
  out.notes.assign(hb.pruned_.begin(), hb.pruned_.end());
  return out;
}

}  // namespace wattlens::hir
