#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "wattlens/energy.hpp"
#include "wattlens/machine.hpp"
#include "wattlens/model.hpp"
#include "wattlens/probabilistic.hpp"
#include "wattlens/simulator.hpp"
#include "wattlens/staticanalysis.hpp"

namespace wattlens {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 success, 1 diagnostics from a module, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct LevelComparison {
  std::string program;
  Energy eir_upper, hir_upper;
  double deviation_percent = 0.0;  // (hir - eir) / eir
};

// Both programs are given as HIR source paths.
LevelComparison compare_levels(const std::string& hir_path, const EnergyModel& model);

struct ParametricSummary {
  std::string upper, lower;  // closed forms for main, pJ
  std::optional<std::string> upper_at, lower_at;  // evaluated at the given inputs
};

struct TransparencyReport {
  std::string program;
  int n_threads = 1;
  std::optional<Energy> simulated;
  std::optional<Energy> simulated_idle;
  std::optional<Energy> statistics;
  Energy eir_upper, eir_lower;
  std::optional<Energy> hir_upper;
  std::optional<ParametricSummary> parametric;
  std::vector<std::string> notes;
  StaticProfile profile;
  std::optional<probabilistic::EnergyDistribution> distribution;
};

struct ReportRequest {
  std::string path;  // .eir or .hir
  std::optional<Inputs> inputs;
  std::optional<std::string> distribution_json;
  int n_threads = 1;
};

// Throws Error if the orderings lower <= simulated <= upper do not hold.
TransparencyReport build_report(const ReportRequest& request, const EnergyModel& model);
std::string report_json(const TransparencyReport& r);

}  // namespace wattlens
