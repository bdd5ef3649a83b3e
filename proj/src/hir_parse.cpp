#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "wattlens/errors.hpp"
#include "wattlens/hir.hpp"

namespace wattlens::hir {

namespace {

struct Token {
  enum class Kind { ident, number, symbol, end };
  Kind kind = Kind::end;
  std::string text;
  std::uint64_t value = 0;
  int line = 1;
  int col = 1;
};

std::vector<Token> lex(const std::string& src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto bump = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  static const std::vector<std::string> symbols = {"..", "==", "!=", "<=", ">=", "<<", "{", "}", "(", ")", "[", "]",
                                                   ";",  ",",  ":",  "=",  "<",  ">",  "+", "-", "*", "&", "^", "@"};
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      bump(1);
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') bump(1);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.kind = Token::Kind::ident;
      t.text = src.substr(i, j - i);
      bump(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      int base = 10;
      if (c == '0' && i + 1 < src.size() && (src[i + 1] == 'x' || src[i + 1] == 'X')) {
        base = 16;
        j += 2;
      }
      std::size_t start = j;
      while (j < src.size() && std::isxdigit(static_cast<unsigned char>(src[j])) &&
             (base == 16 || std::isdigit(static_cast<unsigned char>(src[j]))))
        ++j;
      if (j == start) throw ParseError("malformed number", line, col);
      t.kind = Token::Kind::number;
      t.text = src.substr(i, j - i);
      std::uint64_t v = 0;
      for (std::size_t k = start; k < j; ++k) {
        int d = std::isdigit(static_cast<unsigned char>(src[k])) ? src[k] - '0' : std::tolower(src[k]) - 'a' + 10;
        v = v * static_cast<std::uint64_t>(base) + static_cast<std::uint64_t>(d);
        if (v > 0xffffffffull) throw ParseError("integer literal out of 32-bit range", line, col);
      }
      t.value = v;
      bump(j - i);
    } else {
      bool found = false;
      for (const auto& s : symbols) {
        if (src.compare(i, s.size(), s) == 0) {
          t.kind = Token::Kind::symbol;
          t.text = s;
          bump(s.size());
          found = true;
          break;
        }
      }
      if (!found) throw ParseError(std::string("unexpected character '") + c + "'", line, col);
    }
    out.push_back(t);
  }
  Token e;
  e.line = line;
  e.col = col;
  out.push_back(e);
  return out;
}

const std::set<std::string> kKeywords = {"array", "fn", "var", "if", "else", "for", "in", "while", "return"};

class Parser {
 public:
  explicit Parser(const std::string& text) : toks_(lex(text)) {}

  HirProgram parse() {
    HirProgram p;
    int base = 0;
    while (peek().kind != Token::Kind::end) {
      if (is("array")) {
        next();
        ArrayDecl a;
        Token name = ident();
        a.name = name.text;
        expect("[");
        Token n = number();
        if (n.value == 0 || n.value > static_cast<std::uint64_t>(kMemoryWords))
          throw ParseError("array size out of range", n.line, n.col);
        a.size = static_cast<int>(n.value);
        expect("]");
        expect(";");
        a.base = base;
        base += a.size;
        if (base > kMemoryWords) throw ParseError("arrays exceed " + std::to_string(kMemoryWords) + " words", name.line, name.col);
        if (p.array(a.name)) throw ParseError("duplicate array " + a.name, name.line, name.col);
        p.arrays.push_back(a);
      } else if (is("fn")) {
        p.functions.push_back(function());
      } else {
        fail("expected 'array' or 'fn'");
      }
    }
    p.stmt_count = next_id_ - 1;
    for (std::size_t f = 0; f < p.functions.size(); ++f) p.functions[f].glue_id = next_id_ + static_cast<int>(f);
    return p;
  }

 private:
  const Token& peek(int k = 0) const { return toks_[std::min(pos_ + static_cast<std::size_t>(k), toks_.size() - 1)]; }
  Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool is(const std::string& s, int k = 0) const {
    const Token& t = peek(k);
    return t.kind != Token::Kind::end && t.kind != Token::Kind::number && t.text == s;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    std::string got = t.kind == Token::Kind::end ? "end of input" : "'" + t.text + "'";
    throw ParseError(msg + ", got " + got, t.line, t.col);
  }
  void expect(const std::string& s) {
    if (!is(s)) fail("expected '" + s + "'");
    next();
  }
  Token ident() {
    if (peek().kind != Token::Kind::ident || kKeywords.contains(peek().text)) fail("expected identifier");
    return next();
  }
  Token number() {
    if (peek().kind != Token::Kind::number) fail("expected integer");
    return next();
  }
  std::int64_t signed_number() {
    bool neg = false;
    if (is("-")) {
      next();
      neg = true;
    }
    Token n = number();
    std::int64_t v = static_cast<std::int64_t>(n.value);
    return neg ? -v : v;
  }

  HirFunction function() {
    Token kw = next();
    HirFunction f;
    f.line = kw.line;
    f.name = ident().text;
    expect("(");
    if (!is(")")) {
      while (true) {
        Param pr;
        Token n = ident();
        pr.name = n.text;
        expect(":");
        pr.lo = signed_number();
        expect("..");
        pr.hi = signed_number();
        if (pr.lo > pr.hi || pr.lo < INT32_MIN || pr.hi > INT32_MAX)
          throw ParseError("malformed domain for parameter " + pr.name, n.line, n.col);
        f.params.push_back(pr);
        if (!is(",")) break;
        next();
      }
    }
    expect(")");
    f.body = block();
    return f;
  }

  std::vector<Stmt> block() {
    expect("{");
    std::vector<Stmt> out;
    while (!is("}")) {
      if (peek().kind == Token::Kind::end) fail("expected '}'");
      out.push_back(statement());
    }
    next();
    return out;
  }

  Stmt statement() {
    Stmt s;
    s.id = next_id_++;
    s.line = peek().line;
    if (is("var")) {
      next();
      s.kind = StmtKind::var_decl;
      s.name = ident().text;
      expect("=");
      s.value = expr();
      expect(";");
    } else if (is("if")) {
      next();
      s.kind = StmtKind::if_;
      s.cond = cond();
      s.body = block();
      if (is("else")) {
        next();
        s.has_else = true;
        if (is("if"))
          s.else_body.push_back(statement());
        else
          s.else_body = block();
      }
    } else if (is("for")) {
      next();
      s.kind = StmtKind::for_;
      s.name = ident().text;
      if (!is("in")) fail("expected 'in'");
      next();
      s.value = expr();
      expect("..");
      s.index = expr();
      s.body = block();
    } else if (is("while")) {
      next();
      s.kind = StmtKind::while_;
      s.cond = cond();
      expect("@");
      if (!is("bound")) fail("expected 'bound'");
      next();
      Token n = number();
      s.bound = static_cast<std::int64_t>(n.value);
      s.body = block();
    } else if (is("return")) {
      next();
      s.kind = StmtKind::return_;
      if (is(";")) {
        s.has_value = false;
      } else {
        s.value = expr();
      }
      expect(";");
    } else {
      Token n = ident();
      s.name = n.text;
      if (is("[")) {
        next();
        s.kind = StmtKind::store;
        s.index = expr();
        expect("]");
        expect("=");
        s.value = expr();
      } else if (is("=")) {
        next();
        s.kind = StmtKind::assign;
        s.value = expr();
      } else if (is("(")) {
        s.kind = StmtKind::call;
        s.value = call_rest(n);
      } else {
        fail("expected '=', '[' or '('");
      }
      expect(";");
    }
    return s;
  }

  Cond cond() {
    Cond c;
    c.a = expr();
    static const std::vector<std::pair<std::string, RelOp>> rel = {
        {"<", RelOp::lt}, {"<=", RelOp::le}, {">", RelOp::gt}, {">=", RelOp::ge}, {"==", RelOp::eq}, {"!=", RelOp::ne}};
    for (const auto& [s, op] : rel)
      if (is(s)) {
        next();
        c.op = op;
        c.b = expr();
        return c;
      }
    c.op = RelOp::nz;
    return c;
  }

  Expr binary(BinOp op, Expr a, Expr b, int line) {
    Expr e;
    e.kind = Expr::Kind::binary;
    e.op = op;
    e.line = line;
    e.args.push_back(std::move(a));
    e.args.push_back(std::move(b));
    return e;
  }

  // Loosest to tightest: ^, &, <<, + -, *.
  Expr expr() { return level(0); }
  Expr level(int k) {
    static const std::vector<std::vector<std::pair<std::string, BinOp>>> ops = {
        {{"^", BinOp::bxor}},
        {{"&", BinOp::band}},
        {{"<<", BinOp::shl}},
        {{"+", BinOp::add}, {"-", BinOp::sub}},
        {{"*", BinOp::mul}},
    };
    if (k == static_cast<int>(ops.size())) return unary();
    Expr lhs = level(k + 1);
    while (true) {
      bool matched = false;
      for (const auto& [s, op] : ops[static_cast<std::size_t>(k)])
        if (is(s)) {
          int line = next().line;
          lhs = binary(op, std::move(lhs), level(k + 1), line);
          matched = true;
          break;
        }
      if (!matched) return lhs;
    }
  }
  Expr unary() {
    if (is("-")) {
      int line = next().line;
      Expr zero;
      zero.line = line;
      return binary(BinOp::sub, zero, unary(), line);
    }
    return primary();
  }
  Expr primary() {
    Expr e;
    e.line = peek().line;
    if (peek().kind == Token::Kind::number) {
      e.kind = Expr::Kind::constant;
      e.value = static_cast<std::uint32_t>(next().value);
      return e;
    }
    if (is("(")) {
      next();
      e = expr();
      expect(")");
      return e;
    }
    Token n = ident();
    if (is("[")) {
      next();
      e.kind = Expr::Kind::index;
      e.name = n.text;
      e.args.push_back(expr());
      expect("]");
      return e;
    }
    if (is("(")) return call_rest(n);
    e.kind = Expr::Kind::var;
    e.name = n.text;
    return e;
  }
  Expr call_rest(const Token& n) {
    Expr e;
    e.kind = Expr::Kind::call;
    e.name = n.text;
    e.line = n.line;
    expect("(");
    if (!is(")")) {
      while (true) {
        e.args.push_back(expr());
        if (!is(",")) break;
        next();
      }
    }
    expect(")");
    return e;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int next_id_ = 1;
};

// Scope and shape checks after parsing.
class Checker {
 public:
  explicit Checker(const HirProgram& p) : p_(p) {}

  void run() {
    std::set<std::string> names;
    for (const auto& f : p_.functions) {
      if (!names.insert(f.name).second) throw ParseError("duplicate function " + f.name, f.line, 1);
      if (p_.array(f.name)) throw ParseError(f.name + " is both an array and a function", f.line, 1);
    }
    const HirFunction* main = p_.find("main");
    if (!main) throw ParseError("no function 'main'");
    for (const auto& f : p_.functions) {
      scalars_.clear();
      for (const auto& pr : f.params) {
        if (p_.array(pr.name)) throw ParseError(pr.name + " shadows an array", f.line, 1);
        if (!scalars_.insert(pr.name).second) throw ParseError("duplicate parameter " + pr.name, f.line, 1);
      }
      std::vector<std::string> open;
      stmts(f.body, open);
    }
  }

 private:
  [[noreturn]] void fail(const std::string& msg, int line) const { throw ParseError(msg, line, 1); }

  void expr(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::constant: break;
      case Expr::Kind::var:
        if (p_.array(e.name)) fail("array " + e.name + " used as a scalar", e.line);
        if (!scalars_.contains(e.name)) fail("undeclared variable " + e.name, e.line);
        break;
      case Expr::Kind::index:
        if (!p_.array(e.name)) fail("unknown array " + e.name, e.line);
        expr(e.args[0]);
        break;
      case Expr::Kind::call: {
        const HirFunction* g = p_.find(e.name);
        if (!g) fail("unknown function " + e.name, e.line);
        if (g->name == "main") fail("main cannot be called", e.line);
        if (g->params.size() != e.args.size()) fail("wrong argument count for " + e.name, e.line);
        for (const auto& a : e.args) expr(a);
        break;
      }
      case Expr::Kind::binary:
        expr(e.args[0]);
        expr(e.args[1]);
        break;
    }
  }

  void declare(const std::string& name, int line) {
    if (p_.array(name) || p_.find(name)) fail(name + " shadows an array or function", line);
    scalars_.insert(name);
  }

  void stmts(const std::vector<Stmt>& body, std::vector<std::string>& open) {
    for (const auto& s : body) {
      switch (s.kind) {
        case StmtKind::var_decl:
          expr(s.value);
          if (scalars_.contains(s.name)) fail("redeclared variable " + s.name, s.line);
          declare(s.name, s.line);
          break;
        case StmtKind::assign:
          expr(s.value);
          if (!scalars_.contains(s.name)) fail("undeclared variable " + s.name, s.line);
          for (const auto& i : open)
            if (i == s.name) fail("loop index " + s.name + " assigned inside its loop", s.line);
          break;
        case StmtKind::store:
          if (!p_.array(s.name)) fail("unknown array " + s.name, s.line);
          expr(s.index);
          expr(s.value);
          break;
        case StmtKind::call:
        case StmtKind::return_:
          if (s.has_value) expr(s.value);
          break;
        case StmtKind::if_:
          expr(s.cond.a);
          if (s.cond.op != RelOp::nz) expr(s.cond.b);
          stmts(s.body, open);
          stmts(s.else_body, open);
          break;
        case StmtKind::while_:
          expr(s.cond.a);
          if (s.cond.op != RelOp::nz) expr(s.cond.b);
          stmts(s.body, open);
          break;
        case StmtKind::for_: {
          expr(s.value);
          expr(s.index);
          for (const auto& i : open)
            if (i == s.name) fail("nested loops reuse index " + s.name, s.line);
          if (!scalars_.contains(s.name)) declare(s.name, s.line);
          open.push_back(s.name);
          stmts(s.body, open);
          open.pop_back();
          break;
        }
      }
    }
  }

  const HirProgram& p_;
  std::set<std::string> scalars_;
};

}  // namespace

const HirFunction* HirProgram::find(const std::string& name) const {
  for (const auto& f : functions)
    if (f.name == name) return &f;
  return nullptr;
}

const ArrayDecl* HirProgram::array(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

HirProgram parse_hir(const std::string& text) {
  HirProgram p = Parser(text).parse();
  Checker(p).run();
  return p;
}

HirProgram load_hir(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_hir(ss.str());
}

std::string_view part_name(Part p) {
  switch (p) {
    case Part::main: return "main";
    case Part::entry: return "entry";
    case Part::iteration: return "iteration";
    case Part::then_join: return "then-join";
    case Part::else_join: return "else-join";
    case Part::exit_jump: return "exit-jump";
    case Part::latch: return "latch";
  }
  return "";
}

std::string describe(const Stmt& s) {
  std::string where = "line " + std::to_string(s.line) + ": ";
  switch (s.kind) {
    case StmtKind::var_decl: return where + "var " + s.name;
    case StmtKind::assign: return where + s.name + " = ...";
    case StmtKind::store: return where + s.name + "[...] = ...";
    case StmtKind::if_: return where + "if";
    case StmtKind::for_: return where + "for " + s.name;
    case StmtKind::while_: return where + "while";
    case StmtKind::return_: return where + "return";
    case StmtKind::call: return where + "call " + s.value.name;
  }
  return where;
}

// ---------------------------------------------------------------------------
// Reference interpreter

namespace {

bool less32(std::uint32_t a, std::uint32_t b) { return static_cast<std::int32_t>(a - b) < 0; }

class Interp {
 public:
  Interp(const HirProgram& p, std::int64_t fuel) : p_(p), fuel_(fuel) { memory_.assign(kMemoryWords, 0); }

  struct Frame {
    std::map<std::string, std::uint32_t> vars;
  };

  enum class Flow { next, returned };

  std::uint32_t call(const HirFunction& f, const std::vector<std::uint32_t>& args) {
    if (++depth_ > 4096) throw SimulationError("call depth exceeded in " + f.name);
    Frame fr;
    for (std::size_t i = 0; i < f.params.size(); ++i) {
      const Param& pr = f.params[i];
      std::int64_t v = static_cast<std::int32_t>(args[i]);
      if (v < pr.lo || v > pr.hi)
        throw SimulationError("argument " + pr.name + " = " + std::to_string(v) + " of " + f.name + " outside its domain");
      fr.vars[pr.name] = args[i];
    }
    std::uint32_t ret = 0;
    run(f.body, fr, ret);
    --depth_;
    return ret;
  }

  std::vector<std::uint32_t> memory_;

 private:
  void tick(int line) {
    if (--fuel_ < 0) throw SimulationError("out of fuel at line " + std::to_string(line));
  }

  std::uint32_t& word(const std::string& array, std::uint32_t index, int line) {
    const ArrayDecl* a = p_.array(array);
    if (index >= static_cast<std::uint32_t>(a->size))
      throw SimulationError("index " + std::to_string(index) + " out of bounds for " + array + " at line " + std::to_string(line));
    return memory_[static_cast<std::size_t>(a->base) + index];
  }

  std::uint32_t eval(const Expr& e, Frame& fr) {
    switch (e.kind) {
      case Expr::Kind::constant: return e.value;
      case Expr::Kind::var: {
        auto it = fr.vars.find(e.name);
        if (it == fr.vars.end()) throw SimulationError("read of unassigned variable " + e.name + " at line " + std::to_string(e.line));
        return it->second;
      }
      case Expr::Kind::index: return word(e.name, eval(e.args[0], fr), e.line);
      case Expr::Kind::call: {
        std::vector<std::uint32_t> args;
        for (const auto& a : e.args) args.push_back(eval(a, fr));
        return call(*p_.find(e.name), args);
      }
      case Expr::Kind::binary: {
        std::uint32_t a = eval(e.args[0], fr);
        std::uint32_t b = eval(e.args[1], fr);
        switch (e.op) {
          case BinOp::add: return a + b;
          case BinOp::sub: return a - b;
          case BinOp::mul: return a * b;
          case BinOp::band: return a & b;
          case BinOp::bxor: return a ^ b;
          case BinOp::shl: return a << (b & 31u);
        }
      }
    }
    return 0;
  }

  bool test(const Cond& c, Frame& fr) {
    std::uint32_t a = eval(c.a, fr);
    if (c.op == RelOp::nz) return a != 0;
    std::uint32_t b = eval(c.b, fr);
    switch (c.op) {
      case RelOp::lt: return less32(a, b);
      case RelOp::le: return !less32(b, a);
      case RelOp::gt: return less32(b, a);
      case RelOp::ge: return !less32(a, b);
      case RelOp::eq: return a == b;
      case RelOp::ne: return a != b;
      case RelOp::nz: break;
    }
    return false;
  }

  Flow run(const std::vector<Stmt>& body, Frame& fr, std::uint32_t& ret) {
    for (const auto& s : body) {
      tick(s.line);
      switch (s.kind) {
        case StmtKind::var_decl:
        case StmtKind::assign: fr.vars[s.name] = eval(s.value, fr); break;
        case StmtKind::store: {
          std::uint32_t i = eval(s.index, fr);
          std::uint32_t v = eval(s.value, fr);
          word(s.name, i, s.line) = v;
          break;
        }
        case StmtKind::call: eval(s.value, fr); break;
        case StmtKind::return_:
          ret = s.has_value ? eval(s.value, fr) : 0;
          return Flow::returned;
        case StmtKind::if_:
          if (run(test(s.cond, fr) ? s.body : s.else_body, fr, ret) == Flow::returned) return Flow::returned;
          break;
        case StmtKind::while_: {
          std::int64_t n = 0;
          while (test(s.cond, fr)) {
            if (run(s.body, fr, ret) == Flow::returned) return Flow::returned;
            if (++n > s.bound)
              throw SimulationError("while loop at line " + std::to_string(s.line) + " exceeded @bound " + std::to_string(s.bound));
            tick(s.line);
          }
          break;
        }
        case StmtKind::for_: {
          std::uint32_t lo = eval(s.value, fr);
          std::uint32_t hi = eval(s.index, fr);
          fr.vars[s.name] = lo;
          if (less32(hi - 1u, lo)) break;  // hi - 1 < i: no iterations
          do {
            if (run(s.body, fr, ret) == Flow::returned) return Flow::returned;
            fr.vars[s.name] += 1u;
            tick(s.line);
          } while (less32(fr.vars[s.name], hi));
          break;
        }
      }
    }
    return Flow::next;
  }

  const HirProgram& p_;
  std::int64_t fuel_;
  int depth_ = 0;
};

}  // namespace

HirResult interpret(const HirProgram& p, const Inputs& in, std::int64_t fuel) {
  const HirFunction* main = p.find("main");
  if (!main) throw SimulationError("no function 'main'");
  Interp it(p, fuel);
  for (auto [a, v] : in.memory) {
    if (a < 0 || a >= kMemoryWords) throw SimulationError("input memory address out of range");
    it.memory_[static_cast<std::size_t>(a)] = static_cast<std::uint32_t>(v);
  }
  std::vector<std::uint32_t> args(main->params.size(), 0);
  for (auto [r, v] : in.registers) {
    if (r < 0 || r >= static_cast<int>(args.size())) throw SimulationError("input for unknown parameter " + std::to_string(r));
    const Param& pr = main->params[static_cast<std::size_t>(r)];
    if (v < pr.lo || v > pr.hi)
      throw SimulationError("parameter " + pr.name + " = " + std::to_string(v) + " outside its domain");
    args[static_cast<std::size_t>(r)] = static_cast<std::uint32_t>(v);
  }
  for (std::size_t i = 0; i < args.size(); ++i)
    if (!in.registers.contains(static_cast<int>(i))) {
      const Param& pr = main->params[i];
      if (pr.lo > 0 || pr.hi < 0) throw SimulationError("parameter " + pr.name + " = 0 outside its domain");
    }
  HirResult r;
  r.value = it.call(*main, args);
  r.memory = it.memory_;
  return r;
}

// ---------------------------------------------------------------------------
// Intervals

namespace {

bool in32(std::int64_t v) { return v >= INT32_MIN && v <= INT32_MAX; }

std::optional<Interval> checked(std::int64_t lo, std::int64_t hi) {
  if (!in32(lo) || !in32(hi)) return std::nullopt;
  return Interval{lo, hi};
}

}  // namespace

std::optional<Interval> eval_interval(const Expr& e, const IntervalEnv& env) {
  switch (e.kind) {
    case Expr::Kind::constant: return checked(e.value, e.value);
    case Expr::Kind::var: {
      auto it = env.find(e.name);
      if (it == env.end()) return std::nullopt;
      return it->second;
    }
    case Expr::Kind::index:
    case Expr::Kind::call: return std::nullopt;
    case Expr::Kind::binary: {
      auto a = eval_interval(e.args[0], env);
      auto b = eval_interval(e.args[1], env);
      if (!a || !b) return std::nullopt;
      switch (e.op) {
        case BinOp::add: return checked(a->lo + b->lo, a->hi + b->hi);
        case BinOp::sub: return checked(a->lo - b->hi, a->hi - b->lo);
        case BinOp::mul: {
          std::int64_t c[4] = {a->lo * b->lo, a->lo * b->hi, a->hi * b->lo, a->hi * b->hi};
          return checked(*std::min_element(c, c + 4), *std::max_element(c, c + 4));
        }
        default:
          if (a->lo == a->hi && b->lo == b->hi) {
            std::uint32_t x = static_cast<std::uint32_t>(a->lo), y = static_cast<std::uint32_t>(b->lo);
            std::uint32_t v = e.op == BinOp::band ? x & y : e.op == BinOp::bxor ? x ^ y : x << (y & 31u);
            std::int64_t s = static_cast<std::int32_t>(v);
            return Interval{s, s};
          }
          return std::nullopt;
      }
    }
  }
  return std::nullopt;
}

std::optional<bool> decide(const Cond& c, const IntervalEnv& env) {
  auto a = eval_interval(c.a, env);
  if (!a) return std::nullopt;
  if (c.op == RelOp::nz) {
    if (a->lo > 0 || a->hi < 0) return true;
    if (a->lo == 0 && a->hi == 0) return false;
    return std::nullopt;
  }
  auto b = eval_interval(c.b, env);
  if (!b) return std::nullopt;
  auto less = [](Interval x, Interval y) -> std::optional<bool> {
    std::int64_t lo = x.lo - y.hi, hi = x.hi - y.lo;
    if (!in32(lo) || !in32(hi)) return std::nullopt;
    if (hi < 0) return true;
    if (lo >= 0) return false;
    return std::nullopt;
  };
  auto negate = [](std::optional<bool> v) { return v ? std::optional(!*v) : v; };
  switch (c.op) {
    case RelOp::lt: return less(*a, *b);
    case RelOp::gt: return less(*b, *a);
    case RelOp::le: return negate(less(*b, *a));
    case RelOp::ge: return negate(less(*a, *b));
    case RelOp::eq:
    case RelOp::ne: {
      std::optional<bool> eq;
      if (a->lo == a->hi && b->lo == b->hi && a->lo == b->lo) eq = true;
      if (a->hi < b->lo || b->hi < a->lo) eq = false;
      return c.op == RelOp::eq ? eq : negate(eq);
    }
    case RelOp::nz: break;
  }
  return std::nullopt;
}

void assigned_vars(const std::vector<Stmt>& body, std::map<std::string, bool>& out) {
  for (const auto& s : body) {
    if (s.kind == StmtKind::var_decl || s.kind == StmtKind::assign || s.kind == StmtKind::for_) out[s.name] = true;
    assigned_vars(s.body, out);
    assigned_vars(s.else_body, out);
  }
}

IntervalEnv entry_env(const HirFunction& f) {
  std::map<std::string, bool> written;
  assigned_vars(f.body, written);
  IntervalEnv env;
  for (const auto& p : f.params)
    if (!written.contains(p.name)) env[p.name] = {p.lo, p.hi};
  return env;
}

std::optional<Interval> trip_range(const Stmt& loop, const IntervalEnv& env) {
  auto lo = eval_interval(loop.value, env);
  auto hi = eval_interval(loop.index, env);
  if (!lo || !hi) return std::nullopt;
  std::int64_t tmin = std::max<std::int64_t>(0, hi->lo - lo->hi);
  std::int64_t tmax = std::max<std::int64_t>(0, hi->hi - lo->lo);
  return Interval{tmin, tmax};
}

IntervalEnv body_env(const Stmt& loop, const IntervalEnv& env) {
  IntervalEnv out = env;
  auto lo = eval_interval(loop.value, env);
  auto hi = eval_interval(loop.index, env);
  out.erase(loop.name);
  if (lo && hi && hi->hi - 1 >= lo->lo) out[loop.name] = {lo->lo, hi->hi - 1};
  return out;
}

}  // namespace wattlens::hir
