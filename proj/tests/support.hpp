#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wattlens/isa.hpp"
#include "wattlens/model.hpp"

namespace wattlens::testing {

inline std::string fixture(const std::string& name) { return std::string(WATTLENS_FIXTURES) + "/" + name; }

inline bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every opcode at the same power, metadata from the reference ISA.
inline EnergyModel flat_model(double t_clk, double p_b, double overhead, std::vector<double> m_t, double power) {
  EnergyModel m;
  m.t_clk_ns = t_clk;
  m.p_b_mw = p_b;
  m.overhead = overhead;
  m.t_max = static_cast<int>(m_t.size());
  m.m_t = std::move(m_t);
  for (Opcode op : all_opcodes()) {
    m.power[op] = {power, PowerSource::profiled};
    m.isa_meta[op] = isa_spec(op);
  }
  return m;
}

// Distinct per-opcode powers so that path choices are visible in energy.
inline EnergyModel varied_model() {
  EnergyModel m = flat_model(10.0, 20.0, 1.2, {1.0, 0.9, 0.85, 0.8}, 0.0);
  double p = 30.0;
  for (Opcode op : all_opcodes()) {
    m.power[op].power_mw = p;
    p += 3.5;
  }
  return m;
}

}  // namespace wattlens::testing
