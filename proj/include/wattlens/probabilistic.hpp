#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "wattlens/energy.hpp"
#include "wattlens/machine.hpp"
#include "wattlens/model.hpp"
#include "wattlens/simulator.hpp"

namespace wattlens::probabilistic {

struct WeightedInput {
  Inputs inputs;
  double probability = 0.0;
};

// Finite support; probabilities sum to 1.
struct InputDistribution {
  std::vector<WeightedInput> points;
};

// Throws ValidationError unless probabilities are non-negative and sum to
// 1 within 1e-9.
void validate(const InputDistribution& d);

// Uniform product over the program's declared @input domains. Throws
// ValidationError when the support exceeds `limit`.
InputDistribution uniform_inputs(const Program& program, std::size_t limit);

// Binds "rK" or "mem[A]"; throws ValidationError for anything else.
void bind_input(Inputs& in, const std::string& name, std::int64_t value);

using Sampler = std::function<Inputs(std::mt19937_64&)>;

Sampler uniform_sampler(const Program& program);
Sampler point_sampler(const InputDistribution& d);

// JSON forms:
//   {"points": [{"bind": {"r0": 3, "mem[4]": 1}, "p": 0.5}, ...]}
//   {"uniform": "declared"}
InputDistribution parse_distribution(const std::string& json_text, const Program& program, std::size_t limit);
Sampler parse_sampler(const std::string& json_text, const Program& program);

struct EnergyDistribution {
  std::map<Energy, double> pmf;
  std::map<Outcome, double> outcomes;
  std::int64_t runs = 0;
  bool exact = true;
  double mean_pj = 0.0;
  double variance_pj2 = 0.0;
  double std_error_pj = 0.0;  // Monte-Carlo only
  Energy min, max;
  std::vector<std::pair<double, Energy>> quantiles;  // q -> smallest e with P(E <= e) >= q
};

struct DistOptions {
  std::size_t max_support = 100000;
  int threads = 0;  // 0: hardware concurrency
  RunOptions run{.fuel = 10'000'000, .record_events = true};
};

// Runs may execute concurrently; results are merged in input order.
// Simulation errors are rethrown naming the offending input.
EnergyDistribution energy_distribution_exact(const Program& program, const EnergyModel& model,
                                             const InputDistribution& inputs, const DistOptions& options = {});

// Samples are drawn sequentially from one seeded generator, so the result
// depends only on the seed.
EnergyDistribution energy_distribution_mc(const Program& program, const EnergyModel& model, const Sampler& sampler,
                                          std::int64_t n_samples, std::uint64_t seed, const DistOptions& options = {});

std::string describe(const Inputs& in);
std::string distribution_json(const EnergyDistribution& d);
// One row per support point, or `bins` equal-width bins when bins > 0.
std::string histogram_csv(const EnergyDistribution& d, int bins = 0);

}  // namespace wattlens::probabilistic
