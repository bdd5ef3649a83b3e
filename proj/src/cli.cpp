#include "wattlens/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "wattlens/device.hpp"
#include "wattlens/errors.hpp"
#include "wattlens/hir.hpp"
#include "wattlens/parametric.hpp"
#include "wattlens/profiler.hpp"

namespace wattlens {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

class UsageError : public Error {
 public:
  using Error::Error;
};

std::string base_name(const std::string& path) { return fs::path(path).filename().string(); }

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(path + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(path + ": cannot write file");
  out << text;
}

// Prefixes module errors with the file they came from.
template <class F>
auto with_file(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw ParseError(path + ":" + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(e.field(), path + ": " + e.what());
  }
}

struct Loaded {
  Program program;
  std::optional<hir::HirProgram> hir;
  std::optional<hir::Compiled> compiled;
};

bool is_hir(const std::string& path) { return fs::path(path).extension() == ".hir"; }

Loaded load_any(const std::string& path) {
  std::string text = read_text(path);
  Loaded l;
  if (is_hir(path)) {
    l.hir = with_file(path, [&] { return hir::parse_hir(text); });
    l.compiled = hir::compile(*l.hir);
    l.program = l.compiled->program;
  } else {
    l.program = with_file(path, [&] { return parse_program(text); });
  }
  return l;
}

EnergyModel load_model_file(const std::string& path) {
  std::string text = read_text(path);
  return with_file(path, [&] { return parse_model(text); });
}

// k=v pairs; for HIR programs k may also name a parameter of main.
Inputs parse_inputs(const std::vector<std::string>& pairs, const Loaded& l) {
  Inputs in;
  for (const auto& kv : pairs) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--in expects key=value, got '" + kv + "'");
    std::string key = kv.substr(0, eq);
    std::int64_t value = 0;
    try {
      std::size_t used = 0;
      value = std::stoll(kv.substr(eq + 1), &used, 0);
      if (used != kv.size() - eq - 1) throw std::invalid_argument(kv);
    } catch (const std::logic_error&) {
      throw UsageError("--in value is not an integer: '" + kv + "'");
    }
    if (l.hir) {
      const hir::HirFunction& main = *l.hir->find("main");
      for (std::size_t i = 0; i < main.params.size(); ++i)
        if (main.params[i].name == key) key = "r" + std::to_string(i);
    }
    try {
      probabilistic::bind_input(in, key, value);
    } catch (const ValidationError& e) {
      throw UsageError(std::string("--in: ") + e.what());
    }
  }
  return in;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string percent(double v) { return fixed(v, 4); }

// Left-aligned first column, right-aligned numbers.
std::string table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (w.size() <= c) w.push_back(0);
      w[c] = std::max(w[c], r[c].size());
    }
  std::ostringstream os;
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c > 0) os << "  ";
      if (c == 0)
        os << std::left << std::setw(static_cast<int>(w[c])) << r[c];
      else
        os << std::right << std::setw(static_cast<int>(w[c])) << r[c];
    }
    os << "\n";
  }
  std::string s = os.str();
  // Trailing spaces from padding the last column never occur; the first
  // column may pad a row with a single cell.
  std::string out;
  std::istringstream lines(s);
  for (std::string line; std::getline(lines, line);) {
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

Json bound_json(const std::string& program, const std::string& analysis, const EnergyBound& b) {
  Json j;
  j["program"] = program;
  j["analysis"] = analysis;
  j["bound_pj"] = format_pj(b.value);
  j["n_threads"] = b.n_threads;
  j["level"] = b.level;
  j["per_invocation_pj"] = Json::object();
  for (const auto& [f, e] : b.per_invocation) j["per_invocation_pj"][f] = format_pj(e);
  j["block_counts"] = Json::object();
  for (const auto& [k, c] : b.block_counts) j["block_counts"][k] = c;
  j["notes"] = b.notes;
  return j;
}

std::string bound_table(const std::string& program, const std::string& analysis, const EnergyBound& b) {
  std::string out = analysis + " " + program + ": " + format_pj(b.value) + " pJ (" + std::to_string(b.n_threads) +
                    " thread" + (b.n_threads == 1 ? "" : "s") + ", level " + std::to_string(b.level) + ")\n";
  std::vector<std::vector<std::string>> rows{{"function", "per invocation [pJ]"}};
  for (const auto& [f, e] : b.per_invocation) rows.push_back({f, format_pj(e)});
  out += table(rows);
  rows = {{"block", "count"}};
  for (const auto& [k, c] : b.block_counts) rows.push_back({k, std::to_string(c)});
  out += table(rows);
  for (const auto& n : b.notes) out += "note: " + n + "\n";
  return out;
}

Json profile_json(const StaticProfile& p) {
  auto entries = [](const std::vector<ProfileEntry>& es) {
    Json a = Json::array();
    for (const auto& e : es)
      a.push_back({{"name", e.name}, {"count", e.count}, {"energy_pj", format_pj(e.energy)}, {"share", fixed(e.share, 6)}});
    return a;
  };
  Json j;
  j["total_pj"] = format_pj(p.total);
  j["blocks"] = entries(p.blocks);
  j["functions"] = entries(p.functions);
  return j;
}

std::string profile_table(const StaticProfile& p) {
  std::vector<std::vector<std::string>> rows{{"block", "worst count", "energy [pJ]", "share"}};
  for (const auto& e : p.blocks) rows.push_back({e.name, std::to_string(e.count), format_pj(e.energy), fixed(e.share, 4)});
  std::string out = table(rows);
  rows = {{"function", "worst count", "energy [pJ]", "share"}};
  for (const auto& e : p.functions)
    rows.push_back({e.name, std::to_string(e.count), format_pj(e.energy), fixed(e.share, 4)});
  out += table(rows);
  out += "total: " + format_pj(p.total) + " pJ\n";
  return out;
}

std::uint64_t default_seed() {
  if (const char* s = std::getenv("WATTLENS_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::logic_error&) {
      throw UsageError(std::string("WATTLENS_SEED is not an integer: '") + s + "'");
    }
  }
  return 1;
}

bool forks(const Program& p) {
  for (const auto& f : p.functions)
    for (const auto& b : f.blocks)
      for (const auto& i : b.instructions)
        if (i.op == Opcode::FORK) return true;
  return false;
}

std::map<Opcode, InstructionSpec> reference_isa() {
  std::map<Opcode, InstructionSpec> m;
  for (Opcode op : all_opcodes()) m[op] = isa_spec(op);
  return m;
}

const parametric::CostFunction& main_cost(const std::vector<parametric::CostFunction>& fns) {
  for (const auto& f : fns)
    if (f.function == "main") return f;
  throw Error("no cost function for main");
}

}  // namespace

LevelComparison compare_levels(const std::string& hir_path, const EnergyModel& model) {
  Loaded l = load_any(hir_path);
  if (!l.hir) throw UsageError(hir_path + ": compare-levels expects a .hir program");
  LevelComparison c;
  c.program = base_name(hir_path);
  c.eir_upper = wcec(l.program, build_cfg(l.program), model).value;
  c.hir_upper = hir::hir_wcec(*l.hir, hir::lift_model(model, l.program, l.compiled->mapping)).value;
  c.deviation_percent =
      c.eir_upper.fj() == 0 ? 0.0 : 100.0 * static_cast<double>(c.hir_upper.fj() - c.eir_upper.fj()) / c.eir_upper.fj();
  return c;
}

TransparencyReport build_report(const ReportRequest& req, const EnergyModel& model) {
  Loaded l = load_any(req.path);
  TransparencyReport r;
  r.program = base_name(req.path);
  r.n_threads = req.n_threads;
  Cfg cfg = build_cfg(l.program);
  r.eir_upper = wcec(l.program, cfg, model, req.n_threads).value;
  r.eir_lower = bcec(l.program, cfg, model, req.n_threads).value;
  r.profile = static_profile(l.program, cfg, model, req.n_threads);
  bool multi = forks(l.program);
  if (multi) r.notes.push_back("bounds exclude idle energy; simulated energy is compared without its idle part");

  std::vector<std::string> bad;
  auto order = [&](const std::string& what, bool ok) {
    if (!ok) bad.push_back(what);
  };

  if (req.inputs) {
    Trace t = run(l.program, *req.inputs);
    if (t.outcome != Outcome::halted)
      throw Error(req.path + ": simulation ended in " + std::string(outcome_name(t.outcome)));
    EnergyReport e = trace_energy(model, l.program, t);
    r.simulated = e.total;
    r.simulated_idle = e.idle;
    RunOptions quiet;
    quiet.record_events = false;
    r.statistics = statistics_energy(model, run(l.program, *req.inputs, quiet).counts).total;
    Energy active = e.total - e.idle;
    order("eir lower <= simulated", r.eir_lower <= active);
    order("simulated <= eir upper", active <= r.eir_upper);
  }

  if (l.hir) {
    r.hir_upper = hir::hir_wcec(*l.hir, hir::lift_model(model, l.program, l.compiled->mapping)).value;
    if (r.simulated) order("simulated <= hir upper", *r.simulated - *r.simulated_idle <= *r.hir_upper);
    try {
      hir::HirCosts costs = hir::lift_model(model, l.program, l.compiled->mapping);
      auto fns = parametric::solve(parametric::extract_relations(*l.hir, costs));
      const parametric::CostFunction& main = main_cost(fns);
      ParametricSummary ps{main.upper.to_string(), main.lower.to_string(), {}, {}};
      for (const auto& n : main.notes) r.notes.push_back("parametric: " + n);
      if (req.inputs) {
        parametric::Bindings at;
        const hir::HirFunction& f = *l.hir->find("main");
        for (std::size_t i = 0; i < f.params.size(); ++i) {
          auto it = req.inputs->registers.find(static_cast<int>(i));
          if (it != req.inputs->registers.end()) at[f.params[i].name] = it->second;
        }
        parametric::Rational up = parametric::eval_cost(main, parametric::Bound::upper, at);
        parametric::Rational lo = parametric::eval_cost(main, parametric::Bound::lower, at);
        parametric::Rational sim(r.simulated->fj(), 1000);
        order("parametric lower <= simulated", lo <= sim);
        order("simulated <= parametric upper", sim <= up);
        ps.upper_at = parametric::rational_string(up);
        ps.lower_at = parametric::rational_string(lo);
      }
      r.parametric = ps;
    } catch (const UnsupportedError& e) {
      r.notes.push_back(std::string("parametric: ") + e.what());
    }
  }

  if (req.distribution_json) {
    auto inputs = with_file("distribution", [&] {
      return probabilistic::parse_distribution(*req.distribution_json, l.program, probabilistic::DistOptions{}.max_support);
    });
    r.distribution = probabilistic::energy_distribution_exact(l.program, model, inputs);
    order("eir lower <= distribution min", r.eir_lower <= r.distribution->min);
    if (!multi) order("distribution max <= eir upper", r.distribution->max <= r.eir_upper);
  }

  if (!bad.empty()) {
    std::string msg = req.path + ": inconsistent report:";
    for (const auto& b : bad) msg += " " + b + ";";
    throw Error(msg);
  }
  return r;
}

std::string report_json(const TransparencyReport& r) {
  Json j;
  j["program"] = r.program;
  j["n_threads"] = r.n_threads;
  if (r.simulated) {
    j["simulated_pj"] = format_pj(*r.simulated);
    j["simulated_idle_pj"] = format_pj(*r.simulated_idle);
    j["statistics_pj"] = format_pj(*r.statistics);
  }
  j["eir"] = {{"upper_pj", format_pj(r.eir_upper)}, {"lower_pj", format_pj(r.eir_lower)}};
  if (r.hir_upper) j["hir"] = {{"upper_pj", format_pj(*r.hir_upper)}};
  if (r.parametric) {
    Json p;
    p["upper"] = r.parametric->upper;
    p["lower"] = r.parametric->lower;
    if (r.parametric->upper_at) {
      p["upper_at_inputs_pj"] = *r.parametric->upper_at;
      p["lower_at_inputs_pj"] = *r.parametric->lower_at;
    }
    j["parametric"] = p;
  }
  j["static_profile"] = profile_json(r.profile);
  if (r.distribution) {
    const auto& d = *r.distribution;
    Json s;
    s["runs"] = d.runs;
    s["mean_pj"] = fixed(d.mean_pj, 6);
    s["variance_pj2"] = fixed(d.variance_pj2, 6);
    s["min_pj"] = format_pj(d.min);
    s["max_pj"] = format_pj(d.max);
    s["outcomes"] = Json::object();
    for (const auto& [o, p] : d.outcomes) s["outcomes"][std::string(outcome_name(o))] = fixed(p, 12);
    j["distribution"] = s;
  }
  j["notes"] = r.notes;
  return j.dump(2) + "\n";
}

namespace {

struct Opts {
  std::string prog, model, device, out_path, heatmap, trace, stats, inputs_path, histogram;
  std::vector<std::string> progs, in;
  int threads = 1, bins = 0;
  bool stats_only = false, with_profile = false, as_table = false, compare_isa = false, as_json = false;
  std::int64_t fuel = 10'000'000, mc = 0;
  std::optional<std::uint64_t> seed;
};

int cmd_sim(const Opts& o, std::ostream& out) {
  Loaded l = load_any(o.prog);
  EnergyModel m = load_model_file(o.model);
  if (o.stats_only && !o.trace.empty()) throw UsageError("--trace needs recorded events; drop --stats-only");
  RunOptions ro;
  ro.fuel = o.fuel;
  ro.record_events = !o.stats_only;
  Trace t = run(l.program, parse_inputs(o.in, l), ro);
  EnergyReport e = o.stats_only ? statistics_energy(m, t.counts) : trace_energy(m, l.program, t);
  Json j;
  j["program"] = base_name(o.prog);
  j["outcome"] = std::string(outcome_name(t.outcome));
  j["cycles"] = t.cycles;
  j["provenance"] = std::string(provenance_name(e.provenance));
  j["energy_pj"] = format_pj(e.total);
  j["idle_pj"] = format_pj(e.idle);
  if (!o.stats_only) {
    j["per_function_pj"] = Json::object();
    for (const auto& [f, v] : e.per_function) j["per_function_pj"][f] = format_pj(v);
  }
  if (!t.registers.empty()) j["r0"] = t.registers[0];
  out << j.dump(2) << "\n";
  if (!o.trace.empty()) write_text(o.trace, trace_to_jsonl(t));
  if (!o.stats.empty()) write_text(o.stats, to_json(t.stats));
  return 0;
}

int cmd_profile(const Opts& o, std::ostream& out) {
  DeviceGroundTruth dev = with_file(o.device, [&] { return parse_device(read_text(o.device)); });
  EnergyModel m = fit_model(dev, reference_isa());
  write_text(o.out_path, serialize_model(m));
  out << "t_clk_ns " << fixed(m.t_clk_ns, 6) << "\np_b_mw " << fixed(m.p_b_mw, 6) << "\noverhead "
      << fixed(m.overhead, 6) << "\n";
  std::string mt;
  for (double v : m.m_t) mt += " " + fixed(v, 6);
  out << "m_t" << mt << "\n";
  std::vector<std::vector<std::string>> rows{{"opcode", "power [mW]", "source"}};
  for (const auto& [op, p] : m.power)
    rows.push_back({std::string(opcode_name(op)), fixed(p.power_mw, 6),
                    p.source == PowerSource::profiled ? "profiled" : "estimated"});
  out << table(rows);
  if (!o.heatmap.empty()) {
    std::vector<Opcode> ops;
    for (Opcode op : all_opcodes())
      if (is_profileable(isa_spec(op).cls)) ops.push_back(op);
    write_text(o.heatmap, heatmap_csv(pairwise_heatmap(dev, ops, o.threads)));
  }
  return 0;
}

int cmd_bound(const Opts& o, const std::string& which, std::ostream& out) {
  Loaded l = load_any(o.prog);
  EnergyModel m = load_model_file(o.model);
  Cfg cfg = build_cfg(l.program);
  EnergyBound b = which == "wcec" ? wcec(l.program, cfg, m, o.threads) : bcec(l.program, cfg, m, o.threads);
  std::optional<StaticProfile> p;
  if (o.with_profile) p = static_profile(l.program, cfg, m, o.threads);
  if (o.as_table) {
    out << bound_table(base_name(o.prog), which, b);
    if (p) out << profile_table(*p);
  } else {
    Json j = bound_json(base_name(o.prog), which, b);
    if (p) j["profile"] = profile_json(*p);
    out << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_static_profile(const Opts& o, std::ostream& out) {
  Loaded l = load_any(o.prog);
  EnergyModel m = load_model_file(o.model);
  StaticProfile p = static_profile(l.program, build_cfg(l.program), m, o.threads);
  if (o.as_table) {
    out << profile_table(p);
  } else {
    Json j;
    j["program"] = base_name(o.prog);
    j.update(profile_json(p));
    out << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_hir_wcec(const Opts& o, std::ostream& out) {
  if (!is_hir(o.prog)) throw UsageError(o.prog + ": hir-wcec expects a .hir program");
  Loaded l = load_any(o.prog);
  EnergyModel m = load_model_file(o.model);
  EnergyBound b = hir::hir_wcec(*l.hir, hir::lift_model(m, l.program, l.compiled->mapping));
  Json j = bound_json(base_name(o.prog), "hir-wcec", b);
  if (o.compare_isa) {
    LevelComparison c = compare_levels(o.prog, m);
    j["eir_bound_pj"] = format_pj(c.eir_upper);
    j["deviation_percent"] = percent(c.deviation_percent);
  }
  if (o.as_table) {
    out << bound_table(base_name(o.prog), "hir-wcec", b);
    if (o.compare_isa)
      out << "eir wcec: " << j["eir_bound_pj"].get<std::string>() << " pJ, deviation "
          << j["deviation_percent"].get<std::string>() << "%\n";
  } else {
    out << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_param(const Opts& o, std::ostream& out) {
  if (!is_hir(o.prog)) throw UsageError(o.prog + ": param expects a .hir program");
  Loaded l = load_any(o.prog);
  EnergyModel m = load_model_file(o.model);
  auto fns = parametric::solve(parametric::extract_relations(*l.hir, hir::lift_model(m, l.program, l.compiled->mapping)));
  out << (o.as_json ? parametric::cost_functions_json(fns) : parametric::cost_functions_text(fns));
  return 0;
}

int cmd_dist(const Opts& o, std::ostream& out) {
  Loaded l = load_any(o.prog);
  EnergyModel m = load_model_file(o.model);
  std::string text = read_text(o.inputs_path);
  probabilistic::DistOptions dopt;
  dopt.run.fuel = o.fuel;
  probabilistic::EnergyDistribution d;
  if (o.mc > 0) {
    auto s = with_file(o.inputs_path, [&] { return probabilistic::parse_sampler(text, l.program); });
    d = probabilistic::energy_distribution_mc(l.program, m, s, o.mc, o.seed ? *o.seed : default_seed(), dopt);
  } else {
    auto in = with_file(o.inputs_path, [&] { return probabilistic::parse_distribution(text, l.program, dopt.max_support); });
    d = probabilistic::energy_distribution_exact(l.program, m, in, dopt);
  }
  out << probabilistic::distribution_json(d);
  if (!o.histogram.empty()) write_text(o.histogram, probabilistic::histogram_csv(d, o.bins));
  return 0;
}

int cmd_compare(const Opts& o, std::ostream& out) {
  EnergyModel m = load_model_file(o.model);
  std::vector<LevelComparison> cs;
  for (const auto& p : o.progs) {
    try {
      cs.push_back(compare_levels(p, m));
    } catch (const AnalysisError& e) {
      std::vector<std::string> d;
      for (const auto& x : e.diagnostics()) d.push_back(p + ": " + x);
      throw AnalysisError(d);
    }
  }
  std::vector<double> dev;
  int within = 0;
  for (const auto& c : cs) {
    dev.push_back(std::abs(c.deviation_percent));
    if (std::abs(c.deviation_percent) <= 1.0) ++within;
  }
  std::sort(dev.begin(), dev.end());
  double median = dev.empty() ? 0.0
                  : dev.size() % 2 ? dev[dev.size() / 2]
                                   : (dev[dev.size() / 2 - 1] + dev[dev.size() / 2]) / 2.0;
  if (o.as_json) {
    Json j;
    j["programs"] = Json::array();
    for (const auto& c : cs)
      j["programs"].push_back({{"program", c.program},
                               {"eir_wcec_pj", format_pj(c.eir_upper)},
                               {"hir_wcec_pj", format_pj(c.hir_upper)},
                               {"deviation_percent", percent(c.deviation_percent)}});
    j["median_abs_deviation_percent"] = percent(median);
    j["within_one_percent"] = within;
    j["count"] = static_cast<int>(cs.size());
    out << j.dump(2) << "\n";
  } else {
    std::vector<std::vector<std::string>> rows{{"program", "eir wcec [pJ]", "hir wcec [pJ]", "deviation [%]"}};
    for (const auto& c : cs)
      rows.push_back({c.program, format_pj(c.eir_upper), format_pj(c.hir_upper), percent(c.deviation_percent)});
    out << table(rows);
    out << "median |deviation|: " << percent(median) << "%, within 1%: " << within << "/" << cs.size() << "\n";
  }
  return 0;
}

int cmd_report(const Opts& o, std::ostream& out) {
  EnergyModel m = load_model_file(o.model);
  ReportRequest req;
  req.path = o.prog;
  req.n_threads = o.threads;
  if (!o.in.empty()) req.inputs = parse_inputs(o.in, load_any(o.prog));
  if (!o.inputs_path.empty()) req.distribution_json = read_text(o.inputs_path);
  out << report_json(build_report(req, m));
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Energy transparency toolkit: simulate, profile and bound program energy.", "wattlens"};
  app.set_version_flag("--version", std::string("wattlens ") + kVersion);
  app.require_subcommand(1);
  Opts o;

  auto prog = [&](CLI::App* c) { c->add_option("program", o.prog, "program (.eir or .hir)")->required(); };
  auto model = [&](CLI::App* c) { c->add_option("--model", o.model, "energy model JSON")->required(); };
  auto threads = [&](CLI::App* c) {
    c->add_option("--threads", o.threads, "thread count for the bound")->check(CLI::Range(1, 64));
  };
  auto tbl = [&](CLI::App* c) { c->add_flag("--table", o.as_table, "human-readable table instead of JSON"); };

  auto* sim = app.add_subcommand("sim", "simulate one run");
  prog(sim);
  model(sim);
  sim->add_option("--in", o.in, "input binding k=v (rK, mem[A] or a main parameter)");
  sim->add_option("--trace", o.trace, "write the trace as JSON lines");
  sim->add_option("--stats", o.stats, "write execution statistics as JSON");
  sim->add_flag("--stats-only", o.stats_only, "keep counts only and extrapolate energy");
  sim->add_option("--fuel", o.fuel, "cycle limit")->check(CLI::PositiveNumber);

  auto* prof = app.add_subcommand("profile", "fit an energy model from a device");
  prof->add_option("--device", o.device, "device JSON")->required();
  prof->add_option("--out", o.out_path, "model JSON to write")->required();
  prof->add_option("--heatmap", o.heatmap, "write a pairwise power heat map CSV");
  prof->add_option("--threads", o.threads, "threads for the heat map kernels")->check(CLI::Range(1, 64));

  auto* wc = app.add_subcommand("wcec", "worst-case energy bound");
  auto* bc = app.add_subcommand("bcec", "best-case energy bound");
  for (auto* c : {wc, bc}) {
    prog(c);
    model(c);
    threads(c);
    tbl(c);
    c->add_flag("--profile", o.with_profile, "include the static energy profile");
  }

  auto* sp = app.add_subcommand("static-profile", "worst-case energy per block and function");
  prog(sp);
  model(sp);
  threads(sp);
  tbl(sp);

  auto* hw = app.add_subcommand("hir-wcec", "worst-case bound at source level");
  prog(hw);
  model(hw);
  tbl(hw);
  hw->add_flag("--compare-isa", o.compare_isa, "also bound the compiled program");

  auto* pm = app.add_subcommand("param", "closed-form energy bounds in the parameters");
  prog(pm);
  model(pm);
  pm->add_flag("--json", o.as_json, "JSON coefficients instead of text");

  auto* ds = app.add_subcommand("dist", "energy distribution from an input distribution");
  prog(ds);
  model(ds);
  ds->add_option("--inputs", o.inputs_path, "input distribution JSON")->required();
  ds->add_option("--mc", o.mc, "Monte-Carlo samples instead of enumeration")->check(CLI::PositiveNumber);
  ds->add_option("--seed", o.seed, "Monte-Carlo seed (default: WATTLENS_SEED or 1)");
  ds->add_option("--histogram", o.histogram, "write a histogram CSV");
  ds->add_option("--bins", o.bins, "equal-width bins (0: one row per energy)")->check(CLI::NonNegativeNumber);
  ds->add_option("--fuel", o.fuel, "cycle limit per run")->check(CLI::PositiveNumber);

  auto* cl = app.add_subcommand("compare-levels", "source-level against instruction-level bounds");
  cl->add_option("programs", o.progs, ".hir programs")->required();
  model(cl);
  cl->add_flag("--json", o.as_json, "JSON instead of a table");

  auto* rp = app.add_subcommand("report", "transparency report for one program");
  prog(rp);
  model(rp);
  threads(rp);
  rp->add_option("--in", o.in, "input binding k=v");
  rp->add_option("--inputs", o.inputs_path, "input distribution JSON");

  std::vector<const char*> argv{"wattlens"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion& e) {
    out << app.version() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "wattlens: " << e.what() << "\n";
    err << "run 'wattlens --help' for usage\n";
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_sim(o, out);
    if (prof->parsed()) return cmd_profile(o, out);
    if (wc->parsed()) return cmd_bound(o, "wcec", out);
    if (bc->parsed()) return cmd_bound(o, "bcec", out);
    if (sp->parsed()) return cmd_static_profile(o, out);
    if (hw->parsed()) return cmd_hir_wcec(o, out);
    if (pm->parsed()) return cmd_param(o, out);
    if (ds->parsed()) return cmd_dist(o, out);
    if (cl->parsed()) return cmd_compare(o, out);
    if (rp->parsed()) return cmd_report(o, out);
  } catch (const UsageError& e) {
    err << "wattlens: " << e.what() << "\n";
    return 2;
  } catch (const AnalysisError& e) {
    err << "wattlens: analysis failed" << (o.prog.empty() ? "" : " for " + o.prog) << "\n";
    for (const auto& d : e.diagnostics()) err << "  " << d << "\n";
    return 1;
  } catch (const Error& e) {
    err << "wattlens: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace wattlens
