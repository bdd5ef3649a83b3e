#include "wattlens/model.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "wattlens/errors.hpp"

namespace wattlens {

using ojson = nlohmann::ordered_json;

std::string format_pj(Energy e) {
  std::int64_t fj = e.fj();
  std::string sign = fj < 0 ? "-" : "";
  std::uint64_t mag = fj < 0 ? static_cast<std::uint64_t>(-(fj + 1)) + 1 : static_cast<std::uint64_t>(fj);
  std::ostringstream os;
  os << sign << mag / 1000 << '.' << std::setw(3) << std::setfill('0') << mag % 1000;
  return os.str();
}

ScalingDirection EnergyModel::scaling_direction() const {
  bool inc = false, dec = false;
  for (std::size_t i = 1; i < m_t.size(); ++i) {
    if (m_t[i] > m_t[i - 1]) inc = true;
    if (m_t[i] < m_t[i - 1]) dec = true;
  }
  if (inc && !dec) return ScalingDirection::non_decreasing;
  if (dec && !inc) return ScalingDirection::non_increasing;
  return ScalingDirection::constant;  // also returned for invalid tables; validate() rejects those
}

std::int64_t ExecutionStats::issued() const {
  std::int64_t n = 0;
  for (const auto& [key, count] : n_it) n += count;
  return n;
}

ExecutionStats& ExecutionStats::operator+=(const ExecutionStats& o) {
  for (const auto& [key, count] : o.n_it) n_it[key] += count;
  n_idl += o.n_idl;
  total_cycles += o.total_cycles;
  return *this;
}

void validate(const EnergyModel& m) {
  if (!(m.t_clk_ns > 0.0) || !std::isfinite(m.t_clk_ns))
    throw ValidationError("t_clk_ns", "t_clk_ns must be > 0");
  if (!(m.p_b_mw >= 0.0) || !std::isfinite(m.p_b_mw))
    throw ValidationError("p_b_mw", "p_b_mw must be >= 0");
  if (!(m.overhead > 0.0) || !std::isfinite(m.overhead))
    throw ValidationError("overhead", "overhead must be > 0");
  if (m.t_max < 1) throw ValidationError("t_max", "t_max must be >= 1");
  if (m.m_t.size() > static_cast<std::size_t>(m.t_max))
    throw ValidationError("m_t", "m_t has entries beyond t_max");
  for (int t = 1; t <= m.t_max; ++t) {
    if (static_cast<std::size_t>(t) > m.m_t.size() || std::isnan(m.m_t[t - 1]))
      throw ValidationError("m_t", "m_t gap at t=" + std::to_string(t));
    if (!(m.m_t[t - 1] > 0.0) || !std::isfinite(m.m_t[t - 1]))
      throw ValidationError("m_t", "m_t at t=" + std::to_string(t) + " must be > 0");
  }
  bool inc = false, dec = false;
  for (std::size_t i = 1; i < m.m_t.size(); ++i) {
    inc |= m.m_t[i] > m.m_t[i - 1];
    dec |= m.m_t[i] < m.m_t[i - 1];
  }
  if (inc && dec) throw ValidationError("m_t", "m_t must be monotonic in t");

  for (const auto& [op, p] : m.power) {
    std::string name(opcode_name(op));
    if (!m.isa_meta.contains(op))
      throw ValidationError("instructions", "opcode " + name + " has a power but no metadata");
    if (!(p.power_mw >= 0.0) || !std::isfinite(p.power_mw))
      throw ValidationError("instructions." + name + ".power_mw", "power of " + name + " must be >= 0");
  }
  for (const auto& [op, spec] : m.isa_meta) {
    std::string name(opcode_name(op));
    if (!m.power.contains(op))
      throw ValidationError("instructions", "opcode " + name + " has metadata but no power");
    if (spec.opcode != name)
      throw ValidationError("instructions." + name + ".opcode", "metadata opcode mismatch for " + name);
    if (spec.operand_count < 0 || spec.operand_count > 3)
      throw ValidationError("instructions." + name + ".operand_count", "operand_count of " + name + " must be 0..3");
    if (spec.encoding_bits != 16 && spec.encoding_bits != 32)
      throw ValidationError("instructions." + name + ".encoding_bits", "encoding_bits of " + name + " must be 16 or 32");
    if (spec.issue_cycles < 1)
      throw ValidationError("instructions." + name + ".issue_cycles", "issue_cycles of " + name + " must be >= 1");
    const InstructionSpec& ref = isa_spec(op);
    if (spec.issue_cycles != ref.issue_cycles)
      throw ValidationError("instructions." + name + ".issue_cycles",
                            "issue_cycles of " + name + " disagrees with the ISA (" + std::to_string(ref.issue_cycles) + ")");
    if (spec.operand_count != ref.operand_count)
      throw ValidationError("instructions." + name + ".operand_count",
                            "operand_count of " + name + " disagrees with the ISA (" + std::to_string(ref.operand_count) + ")");
  }
}

void validate(const ExecutionStats& s) {
  std::int64_t sum = s.n_idl;
  if (s.n_idl < 0) throw ValidationError("n_idl", "n_idl must be >= 0");
  for (const auto& [key, count] : s.n_it) {
    if (count < 0) throw ValidationError("n_it", "negative cycle count");
    if (key.second < 1) throw ValidationError("n_it", "thread level must be >= 1");
    sum += count;
  }
  if (sum != s.total_cycles)
    throw ValidationError("total_cycles", "total_cycles differs from n_idl + sum of n_it");
}

namespace {

template <typename T>
T field(const ojson& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError("missing field '" + std::string(key) + "' in " + where);
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError("field '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

}  // namespace

EnergyModel parse_model(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("model file: top level must be an object");

  EnergyModel m;
  m.t_clk_ns = field<double>(j, "t_clk_ns", "model");
  m.p_b_mw = field<double>(j, "p_b_mw", "model");
  m.overhead = field<double>(j, "overhead", "model");
  m.t_max = field<int>(j, "t_max", "model");
  auto mt = j.find("m_t");
  if (mt == j.end() || !mt->is_array()) throw ParseError("model: m_t must be an array");
  for (const auto& v : *mt) {
    if (v.is_null()) {
      m.m_t.push_back(std::numeric_limits<double>::quiet_NaN());
    } else if (v.is_number()) {
      m.m_t.push_back(v.get<double>());
    } else {
      throw ParseError("model: m_t entries must be numbers");
    }
  }
  auto ins = j.find("instructions");
  if (ins == j.end() || !ins->is_array()) throw ParseError("model: instructions must be an array");
  for (const auto& e : *ins) {
    auto name = field<std::string>(e, "opcode", "instruction");
    auto op = opcode_from_name(name);
    if (!op) throw ValidationError("instructions", "unknown opcode " + name);
    if (m.power.contains(*op)) throw ValidationError("instructions", "duplicate opcode " + name);
    InstructionPower p;
    p.power_mw = field<double>(e, "power_mw", name);
    auto src = field<std::string>(e, "source", name);
    if (src == "profiled") {
      p.source = PowerSource::profiled;
    } else if (src == "estimated") {
      p.source = PowerSource::estimated;
    } else {
      throw ValidationError("instructions." + name + ".source", "source must be profiled or estimated");
    }
    InstructionSpec s;
    s.opcode = name;
    s.operand_count = field<int>(e, "operand_count", name);
    s.encoding_bits = field<int>(e, "encoding_bits", name);
    s.mem_access = field<bool>(e, "mem_access", name);
    s.issue_cycles = field<int>(e, "issue_cycles", name);
    auto cls = class_from_name(field<std::string>(e, "class", name));
    if (!cls) throw ValidationError("instructions." + name + ".class", "unknown class for " + name);
    s.cls = *cls;
    m.power[*op] = p;
    m.isa_meta[*op] = s;
  }
  validate(m);
  return m;
}

EnergyModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

std::string serialize_model(const EnergyModel& m) {
  ojson j;
  j["t_clk_ns"] = m.t_clk_ns;
  j["p_b_mw"] = m.p_b_mw;
  j["overhead"] = m.overhead;
  j["t_max"] = m.t_max;
  j["m_t"] = m.m_t;
  ojson ins = ojson::array();
  for (const auto& [op, p] : m.power) {
    const InstructionSpec& s = m.isa_meta.at(op);
    ojson e;
    e["opcode"] = std::string(opcode_name(op));
    e["power_mw"] = p.power_mw;
    e["source"] = p.source == PowerSource::profiled ? "profiled" : "estimated";
    e["operand_count"] = s.operand_count;
    e["encoding_bits"] = s.encoding_bits;
    e["mem_access"] = s.mem_access;
    e["issue_cycles"] = s.issue_cycles;
    e["class"] = std::string(class_name(s.cls));
    ins.push_back(std::move(e));
  }
  j["instructions"] = std::move(ins);
  return j.dump(2) + "\n";
}

void save_model(const EnergyModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file " + path);
  out << serialize_model(m);
}

Energy instruction_energy(const EnergyModel& m, Opcode op, int t) {
  auto it = m.power.find(op);
  if (it == m.power.end())
    throw ValidationError("opcode", "model has no power for opcode " + std::string(opcode_name(op)));
  if (t < 1 || t > m.t_max)
    throw ValidationError("t", "thread count " + std::to_string(t) + " outside 1.." + std::to_string(m.t_max));
  // mW * ns = pJ; 1 pJ = 1000 fJ.
  double fj = (m.scaling(t) * it->second.power_mw * m.overhead + m.p_b_mw) * m.t_clk_ns * 1000.0;
  return Energy::from_fj(std::llround(fj));
}

Energy idle_energy(const EnergyModel& m) {
  return Energy::from_fj(std::llround(m.p_b_mw * m.t_clk_ns * 1000.0));
}

Energy energy(const EnergyModel& m, const ExecutionStats& s) {
  Energy total = idle_energy(m) * s.n_idl;
  for (const auto& [key, count] : s.n_it) total += instruction_energy(m, key.first, key.second) * count;
  return total;
}

std::string to_json(const ExecutionStats& s) {
  // Matrix form: one row per opcode, columns t = 1..max level seen.
  int levels = 0;
  for (const auto& [key, count] : s.n_it) levels = std::max(levels, key.second);
  ojson rows = ojson::object();
  for (const auto& [key, count] : s.n_it) {
    std::string name(opcode_name(key.first));
    if (!rows.contains(name)) rows[name] = std::vector<std::int64_t>(static_cast<std::size_t>(levels), 0);
    rows[name][static_cast<std::size_t>(key.second - 1)] = count;
  }
  ojson j;
  j["levels"] = levels;
  j["n_it"] = std::move(rows);
  j["n_idl"] = s.n_idl;
  j["total_cycles"] = s.total_cycles;
  return j.dump(2) + "\n";
}

}  // namespace wattlens
