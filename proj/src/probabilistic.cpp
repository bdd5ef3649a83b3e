#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <thread>

#include "json.hpp"
#include "wattlens/errors.hpp"
#include "wattlens/probabilistic.hpp"

namespace wattlens::probabilistic {

void validate(const InputDistribution& d) {
  if (d.points.empty()) throw ValidationError("points", "distribution has no support");
  double total = 0.0;
  for (const auto& w : d.points) {
    if (!(w.probability >= 0.0)) throw ValidationError("p", "probabilities must be non-negative");
    total += w.probability;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("p", "probabilities sum to " + std::to_string(total));
}

namespace {

void bind(Inputs& in, const InputDomain& d, std::int64_t v) {
  (d.is_memory ? in.memory : in.registers)[d.index] = v;
}

std::size_t support_size(const Program& p, std::size_t limit) {
  std::size_t n = 1;
  for (const auto& d : p.inputs) {
    auto width = static_cast<std::size_t>(d.hi - d.lo + 1);
    if (width > limit || n > limit / width) return limit + 1;
    n *= width;
  }
  return n;
}

}  // namespace

InputDistribution uniform_inputs(const Program& program, std::size_t limit) {
  std::size_t n = support_size(program, limit);
  if (n > limit)
    throw ValidationError("inputs", "support exceeds the limit of " + std::to_string(limit) + " points");
  InputDistribution out;
  out.points.reserve(n);
  std::vector<std::int64_t> cur;
  for (const auto& d : program.inputs) cur.push_back(d.lo);
  for (std::size_t k = 0; k < n; ++k) {
    WeightedInput w;
    for (std::size_t i = 0; i < cur.size(); ++i) bind(w.inputs, program.inputs[i], cur[i]);
    w.probability = 1.0 / static_cast<double>(n);
    out.points.push_back(std::move(w));
    for (std::size_t i = cur.size(); i-- > 0;) {
      if (++cur[i] <= program.inputs[i].hi) break;
      cur[i] = program.inputs[i].lo;
    }
  }
  return out;
}

Sampler uniform_sampler(const Program& program) {
  std::vector<InputDomain> doms = program.inputs;
  return [doms](std::mt19937_64& rng) {
    Inputs in;
    for (const auto& d : doms) bind(in, d, std::uniform_int_distribution<std::int64_t>(d.lo, d.hi)(rng));
    return in;
  };
}

Sampler point_sampler(const InputDistribution& d) {
  validate(d);
  std::vector<double> cdf;
  double acc = 0.0;
  for (const auto& w : d.points) cdf.push_back(acc += w.probability);
  return [d, cdf](std::mt19937_64& rng) {
    double u = std::uniform_real_distribution<double>(0.0, cdf.back())(rng);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t i = std::min(static_cast<std::size_t>(it - cdf.begin()), d.points.size() - 1);
    return d.points[i].inputs;
  };
}

namespace {

InputDomain input_named(const std::string& name) {
  InputDomain d;
  try {
    if (name.size() > 1 && name[0] == 'r') {
      d.index = std::stoi(name.substr(1));
      if (d.index < 0 || d.index >= kRegisterCount) throw std::out_of_range(name);
      return d;
    }
    if (name.rfind("mem[", 0) == 0 && name.back() == ']') {
      d.is_memory = true;
      d.index = std::stoi(name.substr(4, name.size() - 5));
      if (d.index < 0 || d.index >= kMemoryWords) throw std::out_of_range(name);
      return d;
    }
  } catch (const std::logic_error&) {
  }
  throw ValidationError("bind", "unknown input '" + name + "'");
}

nlohmann::json parse_json(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("distribution", e.what());
  }
}

InputDistribution points_of(const nlohmann::json& j) {
  InputDistribution d;
  if (!j.at("points").is_array()) throw ValidationError("points", "must be an array");
  for (const auto& pt : j.at("points")) {
    WeightedInput w;
    if (!pt.contains("p") || !pt["p"].is_number()) throw ValidationError("p", "each point needs a numeric p");
    w.probability = pt["p"].get<double>();
    if (pt.contains("bind"))
      for (const auto& [k, v] : pt["bind"].items()) {
        if (!v.is_number_integer()) throw ValidationError(k, "bound value must be an integer");
        bind_input(w.inputs, k, v.get<std::int64_t>());
      }
    d.points.push_back(std::move(w));
  }
  validate(d);
  return d;
}

}  // namespace

void bind_input(Inputs& in, const std::string& name, std::int64_t value) { bind(in, input_named(name), value); }

InputDistribution parse_distribution(const std::string& json_text, const Program& program, std::size_t limit) {
  nlohmann::json j = parse_json(json_text);
  if (j.contains("points")) {
    InputDistribution d = points_of(j);
    if (d.points.size() > limit)
      throw ValidationError("points", "support exceeds the limit of " + std::to_string(limit) + " points");
    return d;
  }
  if (j.contains("uniform") && j["uniform"] == "declared") return uniform_inputs(program, limit);
  throw ValidationError("distribution", "expected \"points\" or \"uniform\": \"declared\"");
}

Sampler parse_sampler(const std::string& json_text, const Program& program) {
  nlohmann::json j = parse_json(json_text);
  if (j.contains("points")) return point_sampler(points_of(j));
  if (j.contains("uniform") && j["uniform"] == "declared") return uniform_sampler(program);
  throw ValidationError("distribution", "expected \"points\" or \"uniform\": \"declared\"");
}

std::string describe(const Inputs& in) {
  std::string s;
  for (const auto& [r, v] : in.registers) s += (s.empty() ? "" : " ") + ("r" + std::to_string(r)) + "=" + std::to_string(v);
  for (const auto& [a, v] : in.memory)
    s += (s.empty() ? "" : " ") + ("mem[" + std::to_string(a) + "]") + "=" + std::to_string(v);
  return s.empty() ? "(no inputs)" : s;
}

namespace {

struct RunResult {
  Energy energy;
  Outcome outcome = Outcome::halted;
};

std::vector<RunResult> run_all(const Program& p, const EnergyModel& m, const std::vector<const Inputs*>& inputs,
                               const DistOptions& opt) {
  std::vector<RunResult> out(inputs.size());
  std::vector<std::exception_ptr> errors(inputs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < inputs.size();) {
      try {
        Trace t = run(p, *inputs[i], opt.run);
        out[i] = {trace_energy(m, p, t).total, t.outcome};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned n = opt.threads > 0 ? static_cast<unsigned>(opt.threads) : std::max(1u, std::thread::hardware_concurrency());
  n = std::min<unsigned>(n, static_cast<unsigned>(std::max<std::size_t>(1, inputs.size())));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw SimulationError("input " + describe(*inputs[i]) + ": " + e.what());
    }
  }
  return out;
}

void summarise(EnergyDistribution& d) {
  double mean = 0.0, var = 0.0;
  for (const auto& [e, p] : d.pmf) mean += p * e.pj();
  for (const auto& [e, p] : d.pmf) var += p * (e.pj() - mean) * (e.pj() - mean);
  d.mean_pj = mean;
  d.variance_pj2 = var;
  d.min = d.pmf.begin()->first;
  d.max = d.pmf.rbegin()->first;
  for (double q : {0.05, 0.25, 0.5, 0.75, 0.95}) {
    double acc = 0.0;
    Energy at = d.max;
    for (const auto& [e, p] : d.pmf) {
      acc += p;
      if (acc >= q - 1e-12) {
        at = e;
        break;
      }
    }
    d.quantiles.emplace_back(q, at);
  }
}

}  // namespace

EnergyDistribution energy_distribution_exact(const Program& program, const EnergyModel& model,
                                             const InputDistribution& inputs, const DistOptions& options) {
  validate(inputs);
  if (inputs.points.size() > options.max_support)
    throw ValidationError("inputs", "support exceeds the limit of " + std::to_string(options.max_support) + " runs");
  std::vector<const Inputs*> ptrs;
  for (const auto& w : inputs.points) ptrs.push_back(&w.inputs);
  std::vector<RunResult> rs = run_all(program, model, ptrs, options);
  EnergyDistribution d;
  d.exact = true;
  d.runs = static_cast<std::int64_t>(rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    d.pmf[rs[i].energy] += inputs.points[i].probability;
    d.outcomes[rs[i].outcome] += inputs.points[i].probability;
  }
  summarise(d);
  return d;
}

EnergyDistribution energy_distribution_mc(const Program& program, const EnergyModel& model, const Sampler& sampler,
                                          std::int64_t n_samples, std::uint64_t seed, const DistOptions& options) {
  if (n_samples < 1) throw ValidationError("n_samples", "must be at least 1");
  std::mt19937_64 rng(seed);
  std::vector<Inputs> samples;
  samples.reserve(static_cast<std::size_t>(n_samples));
  for (std::int64_t k = 0; k < n_samples; ++k) samples.push_back(sampler(rng));
  std::vector<const Inputs*> ptrs;
  for (const auto& s : samples) ptrs.push_back(&s);
  std::vector<RunResult> rs = run_all(program, model, ptrs, options);
  EnergyDistribution d;
  d.exact = false;
  d.runs = n_samples;
  std::map<Energy, std::int64_t> counts;
  std::map<Outcome, std::int64_t> oc;
  for (const auto& r : rs) {
    ++counts[r.energy];
    ++oc[r.outcome];
  }
  const double n = static_cast<double>(n_samples);
  for (const auto& [e, c] : counts) d.pmf[e] = static_cast<double>(c) / n;
  for (const auto& [o, c] : oc) d.outcomes[o] = static_cast<double>(c) / n;
  summarise(d);
  d.std_error_pj = n_samples > 1 ? std::sqrt(d.variance_pj2 * n / (n - 1) / n) : 0.0;
  return d;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string distribution_json(const EnergyDistribution& d) {
  nlohmann::ordered_json j;
  j["method"] = d.exact ? "exact" : "monte-carlo";
  j["runs"] = d.runs;
  j["mean_pj"] = fixed(d.mean_pj, 6);
  j["variance_pj2"] = fixed(d.variance_pj2, 6);
  if (!d.exact) j["std_error_pj"] = fixed(d.std_error_pj, 6);
  j["min_pj"] = format_pj(d.min);
  j["max_pj"] = format_pj(d.max);
  j["quantiles"] = nlohmann::ordered_json::object();
  for (const auto& [q, e] : d.quantiles) j["quantiles"][fixed(q, 2)] = format_pj(e);
  j["outcomes"] = nlohmann::ordered_json::object();
  for (const auto& [o, p] : d.outcomes) j["outcomes"][std::string(outcome_name(o))] = fixed(p, 12);
  j["pmf"] = nlohmann::ordered_json::array();
  for (const auto& [e, p] : d.pmf) j["pmf"].push_back({{"energy_pj", format_pj(e)}, {"p", fixed(p, 12)}});
  return j.dump(2) + "\n";
}

std::string histogram_csv(const EnergyDistribution& d, int bins) {
  std::string out;
  if (bins <= 0) {
    out = "energy_pj,probability\n";
    for (const auto& [e, p] : d.pmf) out += format_pj(e) + "," + fixed(p, 12) + "\n";
    return out;
  }
  out = "bin_lo_pj,bin_hi_pj,probability\n";
  double lo = d.min.pj(), hi = d.max.pj();
  double width = hi > lo ? (hi - lo) / bins : 1.0;
  std::vector<double> mass(static_cast<std::size_t>(bins), 0.0);
  for (const auto& [e, p] : d.pmf) {
    auto b = static_cast<std::size_t>(std::min<double>(bins - 1, std::floor((e.pj() - lo) / width)));
    mass[b] += p;
  }
  for (int b = 0; b < bins; ++b)
    out += fixed(lo + b * width, 3) + "," + fixed(lo + (b + 1) * width, 3) + "," + fixed(mass[static_cast<std::size_t>(b)], 12) + "\n";
  return out;
}

}  // namespace wattlens::probabilistic
