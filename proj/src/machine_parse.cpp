#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "wattlens/errors.hpp"
#include "wattlens/machine.hpp"

namespace wattlens {

Terminator BasicBlock::terminator() const {
  if (instructions.empty()) return Terminator::fallthrough;
  switch (instructions.back().op) {
    case Opcode::BRT: return Terminator::branch;
    case Opcode::JMP: return Terminator::jump;
    case Opcode::RET: return Terminator::ret;
    case Opcode::HALT: return Terminator::halt;
    default: return Terminator::fallthrough;
  }
}

int Function::block_index(const std::string& label) const {
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].label == label) return static_cast<int>(i);
  return -1;
}

std::string InputDomain::name() const {
  return is_memory ? "mem[" + std::to_string(index) + "]" : "r" + std::to_string(index);
}

int Program::function_index(const std::string& name) const {
  for (std::size_t i = 0; i < functions.size(); ++i)
    if (functions[i].name == name) return static_cast<int>(i);
  return -1;
}

const Function& Program::entry_function() const {
  int i = function_index(entry);
  if (i < 0) throw Error("entry function " + entry + " not found");
  return functions[static_cast<std::size_t>(i)];
}

namespace {

bool is_terminator(Opcode op) {
  return op == Opcode::BRT || op == Opcode::JMP || op == Opcode::RET || op == Opcode::HALT;
}

struct Token {
  std::string text;
  int column;
};

std::vector<Token> tokenize(const std::string& line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && line[i] != ',') ++i;
    out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return out;
}

bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  auto ok_first = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.'; };
  if (!ok_first(s[0])) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  });
}

std::optional<std::int64_t> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t pos = 0;
  bool neg = false;
  if (s[0] == '-' || s[0] == '+') {
    neg = s[0] == '-';
    pos = 1;
  }
  int base = 10;
  if (s.size() > pos + 1 && s[pos] == '0' && (s[pos + 1] == 'x' || s[pos + 1] == 'X')) {
    base = 16;
    pos += 2;
  }
  if (pos >= s.size()) return std::nullopt;
  std::int64_t v = 0;
  for (; pos < s.size(); ++pos) {
    int d;
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(s[pos])));
    if (c >= '0' && c <= '9') {
      d = c - '0';
    } else if (base == 16 && c >= 'a' && c <= 'f') {
      d = c - 'a' + 10;
    } else {
      return std::nullopt;
    }
    if (v > (std::numeric_limits<std::int64_t>::max() - d) / base) return std::nullopt;
    v = v * base + d;
  }
  return neg ? -v : v;
}

// "lo..hi" or "hi" (lo defaults to `default_lo`).
std::optional<std::pair<std::int64_t, std::int64_t>> parse_range(const std::string& s, bool allow_single) {
  auto dots = s.find("..");
  if (dots == std::string::npos) {
    if (!allow_single) return std::nullopt;
    auto v = parse_int(s);
    if (!v) return std::nullopt;
    return std::make_pair(std::int64_t{0}, *v);
  }
  auto lo = parse_int(s.substr(0, dots));
  auto hi = parse_int(s.substr(dots + 2));
  if (!lo || !hi) return std::nullopt;
  return std::make_pair(*lo, *hi);
}

class Parser {
 public:
  Program run(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    while (std::getline(in, raw)) {
      ++line_;
      auto semi = raw.find(';');
      if (semi != std::string::npos) raw.resize(semi);
      auto toks = tokenize(raw);
      if (!toks.empty()) handle(toks);
    }
    if (pending_bound_) throw ParseError("@bound must precede a branch", bound_line_, 1);
    close_function();
    if (program_.functions.empty()) throw ParseError("program has no functions", line_, 1);
    if (program_.entry.empty()) program_.entry = program_.functions.front().name;
    if (program_.function_index(program_.entry) < 0)
      throw ParseError("entry function '" + program_.entry + "' is not defined", entry_line_, 1);
    resolve();
    return std::move(program_);
  }

 private:
  void handle(std::vector<Token>& toks) {
    const std::string& head = toks[0].text;
    if (head == "func") return start_function(toks);
    if (head == "@input") return input_directive(toks);
    if (head == "@entry") {
      if (toks.size() != 2) fail("@entry takes one function name", toks[0]);
      program_.entry = toks[1].text;
      entry_line_ = line_;
      return;
    }
    if (head == "@bound") {
      if (toks.size() != 2) fail("@bound takes one argument", toks[0]);
      auto r = parse_range(toks[1].text, true);
      if (!r || r->first < 0 || r->second < r->first) fail("malformed @bound '" + toks[1].text + "'", toks[1]);
      if (pending_bound_) fail("duplicate @bound", toks[0]);
      pending_bound_ = LoopBound{r->first, r->second};
      bound_line_ = line_;
      return;
    }
    if (head.size() > 1 && head.back() == ':') {
      std::string label = head.substr(0, head.size() - 1);
      if (!is_identifier(label)) fail("malformed label '" + label + "'", toks[0]);
      if (!open_) {
        open_function(label, {});
      }
      start_block(label, toks[0]);
      toks.erase(toks.begin());
      if (toks.empty()) return;
    }
    instruction(toks);
  }

  void start_function(const std::vector<Token>& toks) {
    if (toks.size() < 2 || !is_identifier(toks[1].text)) fail("func needs a name", toks[0]);
    std::vector<int> params;
    for (std::size_t i = 2; i < toks.size(); ++i) params.push_back(reg(toks[i]));
    close_function();
    open_function(toks[1].text, std::move(params));
  }

  void open_function(const std::string& name, std::vector<int> params) {
    if (program_.function_index(name) >= 0) throw ParseError("duplicate function '" + name + "'", line_, 1);
    Function f;
    f.name = name;
    f.params = std::move(params);
    program_.functions.push_back(std::move(f));
    open_ = true;
    cur_ = BasicBlock{};
    cur_labeled_ = false;
  }

  void close_function() {
    if (!open_) return;
    if (cur_labeled_ && cur_.instructions.empty())
      throw ParseError("block '" + cur_.label + "' is empty", line_, 1);
    if (!cur_.instructions.empty())
      throw ParseError("function '" + fn().name + "' falls off the end without RET, HALT or JMP",
                       cur_.instructions.back().line, 1);
    if (fn().blocks.empty()) throw ParseError("function '" + fn().name + "' has no instructions", line_, 1);
    open_ = false;
  }

  Function& fn() { return program_.functions.back(); }

  void start_block(const std::string& label, const Token& tok) {
    if (cur_labeled_ && cur_.instructions.empty()) fail("block '" + cur_.label + "' is empty", tok);
    if (!cur_.instructions.empty()) finish_block();
    for (const auto& b : fn().blocks)
      if (b.label == label) fail("duplicate label '" + label + "'", tok);
    cur_.label = label;
    cur_labeled_ = true;
  }

  void finish_block() {
    fn().blocks.push_back(std::move(cur_));
    cur_ = BasicBlock{};
    cur_labeled_ = false;
  }

  void input_directive(const std::vector<Token>& toks) {
    if (toks.size() != 3) fail("@input takes a target and a range", toks[0]);
    InputDomain d;
    const std::string& t = toks[1].text;
    if (t.rfind("mem[", 0) == 0 && t.back() == ']') {
      auto a = parse_int(t.substr(4, t.size() - 5));
      if (!a || *a < 0 || *a >= kMemoryWords) fail("memory address out of range", toks[1]);
      d.is_memory = true;
      d.index = static_cast<int>(*a);
    } else {
      d.index = reg(toks[1]);
    }
    auto r = parse_range(toks[2].text, false);
    if (!r || r->second < r->first) fail("malformed input range '" + toks[2].text + "'", toks[2]);
    d.lo = r->first;
    d.hi = r->second;
    program_.inputs.push_back(d);
  }

  int reg(const Token& t) {
    const std::string& s = t.text;
    if (s.size() >= 2 && (s[0] == 'r' || s[0] == 'R')) {
      auto v = parse_int(s.substr(1));
      if (v && *v >= 0 && *v < kRegisterCount) return static_cast<int>(*v);
    }
    fail("expected a register r0..r11, got '" + s + "'", t);
  }

  std::int64_t imm(const Token& t) {
    auto v = parse_int(t.text);
    if (!v || *v < -(std::int64_t{1} << 31) || *v > 0xFFFFFFFFLL) fail("bad immediate '" + t.text + "'", t);
    return *v;
  }

  int channel(const Token& t) {
    auto v = parse_int(t.text);
    if (!v || *v < 0 || *v >= kChannelCount) fail("channel must be 0..15, got '" + t.text + "'", t);
    return static_cast<int>(*v);
  }

  std::string name(const Token& t) {
    if (!is_identifier(t.text)) fail("expected a name, got '" + t.text + "'", t);
    return t.text;
  }

  void instruction(const std::vector<Token>& toks) {
    if (!open_) fail("instruction outside a function", toks[0]);
    std::string upper = toks[0].text;
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
    auto op = opcode_from_name(upper);
    if (!op) fail("unknown opcode '" + toks[0].text + "'", toks[0]);
    Instruction ins;
    ins.op = *op;
    ins.line = line_;
    std::size_t argc = toks.size() - 1;
    auto need = [&](std::size_t n) {
      if (argc != n)
        fail(std::string(opcode_name(*op)) + " takes " + std::to_string(n) + " operand(s), got " + std::to_string(argc),
             toks[0]);
    };
    switch (*op) {
      case Opcode::LDC:
        need(2);
        ins.regs[0] = reg(toks[1]);
        ins.imm = imm(toks[2]);
        break;
      case Opcode::ADD: case Opcode::SUB: case Opcode::MUL:
      case Opcode::AND: case Opcode::XOR: case Opcode::SHL:
        need(3);
        for (int i = 0; i < 3; ++i) ins.regs[i] = reg(toks[i + 1]);
        break;
      case Opcode::LDW: case Opcode::STW:
        need(2);
        ins.regs[0] = reg(toks[1]);
        ins.regs[1] = reg(toks[2]);
        break;
      case Opcode::BRT:
        need(2);
        ins.regs[0] = reg(toks[1]);
        ins.target = name(toks[2]);
        break;
      case Opcode::JMP:
        need(1);
        ins.target = name(toks[1]);
        break;
      case Opcode::CALL: case Opcode::FORK:
        need(2);
        ins.target = name(toks[1]);
        ins.regs[0] = reg(toks[2]);
        break;
      case Opcode::RET: case Opcode::HALT:
        need(0);
        break;
      case Opcode::OUT:
        need(2);
        ins.imm = channel(toks[1]);
        ins.regs[0] = reg(toks[2]);
        break;
      case Opcode::IN:
        need(2);
        ins.regs[0] = reg(toks[1]);
        ins.imm = channel(toks[2]);
        break;
    }
    if (pending_bound_) {
      if (ins.op != Opcode::BRT && ins.op != Opcode::JMP) fail("@bound must precede a branch", toks[0]);
      ins.bound = pending_bound_;
      pending_bound_.reset();
    }
    cur_.instructions.push_back(std::move(ins));
    if (is_terminator(*op)) finish_block();
  }

  void resolve() {
    for (auto& f : program_.functions) {
      std::set<std::string> used;
      for (const auto& b : f.blocks)
        if (!b.label.empty()) used.insert(b.label);
      for (std::size_t i = 0; i < f.blocks.size(); ++i) {
        if (!f.blocks[i].label.empty()) continue;
        std::string l = ".b" + std::to_string(i);
        while (used.contains(l)) l += "_";
        used.insert(l);
        f.blocks[i].label = l;
      }
      for (std::size_t i = 0; i < f.blocks.size(); ++i) {
        for (const auto& ins : f.blocks[i].instructions) {
          if (ins.op == Opcode::BRT || ins.op == Opcode::JMP) {
            if (f.block_index(ins.target) < 0)
              throw ParseError("undefined label '" + ins.target + "' in function '" + f.name + "'", ins.line, 1);
          }
          if (ins.op == Opcode::CALL || ins.op == Opcode::FORK) {
            if (program_.function_index(ins.target) < 0)
              throw ParseError("undefined function '" + ins.target + "'", ins.line, 1);
          }
          if (ins.bound) f.loop_bounds[static_cast<int>(i)] = *ins.bound;
        }
      }
    }
  }

  [[noreturn]] void fail(const std::string& msg, const Token& t) { throw ParseError(msg, line_, t.column); }

  Program program_;
  bool open_ = false;
  BasicBlock cur_;
  bool cur_labeled_ = false;
  std::optional<LoopBound> pending_bound_;
  int bound_line_ = 0;
  int entry_line_ = 0;
  int line_ = 0;
};

std::string operands(const Instruction& ins) {
  auto r = [](int i) { return "r" + std::to_string(i); };
  switch (ins.op) {
    case Opcode::LDC: return r(ins.regs[0]) + ", " + std::to_string(ins.imm);
    case Opcode::ADD: case Opcode::SUB: case Opcode::MUL:
    case Opcode::AND: case Opcode::XOR: case Opcode::SHL:
      return r(ins.regs[0]) + ", " + r(ins.regs[1]) + ", " + r(ins.regs[2]);
    case Opcode::LDW: case Opcode::STW: return r(ins.regs[0]) + ", " + r(ins.regs[1]);
    case Opcode::BRT: return r(ins.regs[0]) + ", " + ins.target;
    case Opcode::JMP: return ins.target;
    case Opcode::CALL: case Opcode::FORK: return ins.target + ", " + r(ins.regs[0]);
    case Opcode::OUT: return std::to_string(ins.imm) + ", " + r(ins.regs[0]);
    case Opcode::IN: return r(ins.regs[0]) + ", " + std::to_string(ins.imm);
    case Opcode::RET: case Opcode::HALT: return "";
  }
  return "";
}

}  // namespace

Program parse_program(const std::string& text) { return Parser().run(text); }

Program load_program(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open program file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_program(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ":" + e.what());
  }
}

std::string print_program(const Program& p) {
  std::ostringstream os;
  for (const auto& d : p.inputs) os << "@input " << d.name() << ' ' << d.lo << ".." << d.hi << '\n';
  if (!p.functions.empty() && p.entry != p.functions.front().name) os << "@entry " << p.entry << '\n';
  for (const auto& f : p.functions) {
    os << "func " << f.name;
    for (int r : f.params) os << " r" << r;
    os << '\n';
    for (const auto& b : f.blocks) {
      os << b.label << ":\n";
      for (const auto& ins : b.instructions) {
        if (ins.bound) {
          os << "  @bound ";
          if (ins.bound->lo != 0) os << ins.bound->lo << "..";
          os << ins.bound->hi << '\n';
        }
        os << "  " << opcode_name(ins.op);
        std::string ops = operands(ins);
        if (!ops.empty()) os << ' ' << ops;
        os << '\n';
      }
    }
  }
  return os.str();
}

}  // namespace wattlens
