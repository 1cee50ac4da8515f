#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "onepixel/errors.hpp"
#include "onepixel/rng.hpp"

namespace onepixel::de {

// Inclusive integer box constraints, one (low, high) pair per dimension.
class Bounds {
 public:
  Bounds() = default;
  explicit Bounds(std::vector<std::pair<int, int>> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw ConfigError("bounds need at least one dimension");
    for (const auto& [lo, hi] : dims_)
      if (lo > hi)
        throw ConfigError("bounds dimension has low " + std::to_string(lo) +
                          " > high " + std::to_string(hi));
  }

  std::size_t size() const { return dims_.size(); }
  int low(std::size_t d) const { return dims_[d].first; }
  int high(std::size_t d) const { return dims_[d].second; }
  const std::vector<std::pair<int, int>>& dims() const { return dims_; }

  double clamp(std::size_t d, double v) const {
    return std::min(std::max(v, static_cast<double>(low(d))),
                    static_cast<double>(high(d)));
  }

  // Rounds half away from zero, then clamps. Applied at the objective
  // evaluation and result boundaries; stored population vectors stay real.
  int round_clamp(std::size_t d, double v) const {
    const double r = v < 0 ? std::ceil(v - 0.5) : std::floor(v + 0.5);
    return static_cast<int>(
        std::min(std::max(r, static_cast<double>(low(d))),
                 static_cast<double>(high(d))));
  }

  std::vector<int> round_vector(const std::vector<double>& v) const {
    std::vector<int> out(v.size());
    for (std::size_t d = 0; d < v.size(); ++d) out[d] = round_clamp(d, v[d]);
    return out;
  }

  bool contains(const std::vector<int>& v) const {
    if (v.size() != size()) return false;
    for (std::size_t d = 0; d < size(); ++d)
      if (v[d] < low(d) || v[d] > high(d)) return false;
    return true;
  }

 private:
  std::vector<std::pair<int, int>> dims_;
};

struct Config {
  int population_size = 200;
  double mutation_factor = 0.5;  // F
  double recombination = 0.7;    // CR
  int max_iterations = 100;
  double tolerance = 0.01;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (population_size < 4)
      throw ConfigError("population_size must be >= 4 (best1bin needs best, "
                        "two distinct members and a target)");
    if (!(mutation_factor > 0)) throw ConfigError("mutation factor F must be > 0");
    if (!(recombination >= 0 && recombination <= 1))
      throw ConfigError("recombination CR must lie in [0, 1]");
    if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
    if (!(tolerance >= 0)) throw ConfigError("tolerance must be >= 0");
  }

  friend bool operator==(const Config&, const Config&) = default;
};

struct RunResult {
  std::vector<int> best_vector;
  double best_energy = 0;
  int iterations_completed = 0;
  bool converged_after_initial = false;
  std::vector<double> trace;  // best energy per iteration; index 0 = after init
  std::size_t evaluations = 0;
};

// Objective failure during a run. Iteration 0 is the initial-population
// evaluation; the trace holds the best energies recorded so far.
class RunAborted : public Error {
 public:
  RunAborted(const std::string& what, int iteration, std::vector<double> trace,
             std::size_t evaluations)
      : Error("objective failed at iteration " + std::to_string(iteration) +
              ": " + what),
        iteration_(iteration),
        partial_trace_(std::move(trace)),
        evaluations_(evaluations) {}

  int iteration() const { return iteration_; }
  const std::vector<double>& partial_trace() const { return partial_trace_; }
  std::size_t evaluations() const { return evaluations_; }

 private:
  int iteration_;
  std::vector<double> partial_trace_;
  std::size_t evaluations_;
};

// True iff the population spread has collapsed relative to its mean:
// std(energies) <= tolerance * |mean(energies)|, population std (divide by N).
// The absolute value keeps the rule identical for negated objectives.
inline bool check_convergence(const std::vector<double>& energies, double tolerance) {
  if (energies.empty())
    throw std::invalid_argument("check_convergence: empty energies");
  const double n = static_cast<double>(energies.size());
  const double mean = std::accumulate(energies.begin(), energies.end(), 0.0) / n;
  double sq = 0;
  for (double e : energies) sq += (e - mean) * (e - mean);
  const double sd = std::sqrt(sq / n);
  return sd <= tolerance * std::abs(mean);
}

// Latin hypercube samples before integer rounding. Per dimension, the range
// [low, high+1) is split into population_size equal strata; each member gets
// one stratum (assigned by random permutation) and a uniform draw inside it.
//
// Draw order per dimension: the stratum permutation (Fisher-Yates), then one
// uniform per member in member order.
inline std::vector<std::vector<double>> lhs_init_continuous(const Bounds& bounds,
                                                            int population_size,
                                                            Rng& rng) {
  if (population_size < 1) throw ConfigError("population_size must be >= 1");
  const std::size_t np = static_cast<std::size_t>(population_size);
  std::vector<std::vector<double>> population(np, std::vector<double>(bounds.size()));
  std::vector<std::size_t> strata(np);
  for (std::size_t d = 0; d < bounds.size(); ++d) {
    const double span = static_cast<double>(bounds.high(d)) + 1.0 - bounds.low(d);
    std::iota(strata.begin(), strata.end(), 0);
    rng.shuffle(strata);
    for (std::size_t i = 0; i < np; ++i) {
      const double u = rng.uniform();
      population[i][d] =
          bounds.low(d) + (static_cast<double>(strata[i]) + u) * span /
                              static_cast<double>(population_size);
    }
  }
  return population;
}

// Integer Latin hypercube initialization: continuous samples floored and
// clamped into bounds.
inline std::vector<std::vector<int>> lhs_init(const Bounds& bounds,
                                              int population_size, Rng& rng) {
  const auto continuous = lhs_init_continuous(bounds, population_size, rng);
  std::vector<std::vector<int>> population(continuous.size());
  for (std::size_t i = 0; i < continuous.size(); ++i) {
    population[i].resize(bounds.size());
    for (std::size_t d = 0; d < bounds.size(); ++d) {
      const int v = static_cast<int>(std::floor(continuous[i][d]));
      population[i][d] = std::min(std::max(v, bounds.low(d)), bounds.high(d));
    }
  }
  return population;
}

// Index of the lowest energy; ties go to the lowest index.
inline std::size_t best_index(const std::vector<double>& energies) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < energies.size(); ++i)
    if (energies[i] < energies[best]) best = i;
  return best;
}

// donor = best + F * (r1 - r2)
inline std::vector<double> best1_donor(const std::vector<double>& best,
                                       const std::vector<double>& r1,
                                       const std::vector<double>& r2, double f) {
  std::vector<double> donor(best.size());
  for (std::size_t d = 0; d < best.size(); ++d)
    donor[d] = best[d] + f * (r1[d] - r2[d]);
  return donor;
}

// Binomial crossover: the trial takes the donor component where a uniform
// draw falls below CR, the target component otherwise, with one uniformly
// chosen dimension always forced from the donor.
//
// Draw order: j_rand first, then one uniform per dimension (consumed for
// every dimension, including j_rand, to keep the stream length fixed).
inline std::vector<double> binomial_crossover(const std::vector<double>& donor,
                                              const std::vector<double>& target,
                                              double cr, Rng& rng) {
  const std::size_t dims = donor.size();
  const std::size_t j_rand = rng.below(dims);
  std::vector<double> trial(dims);
  for (std::size_t d = 0; d < dims; ++d) {
    const double u = rng.uniform();
    trial[d] = (d == j_rand || u < cr) ? donor[d] : target[d];
  }
  return trial;
}

// One best1bin trial for the given target: donor from the current best plus a
// scaled difference of two random members (distinct, and distinct from the
// target), binomial crossover, then a clamp into bounds. The trial stays
// real-valued; integer rounding happens when it is evaluated.
inline std::vector<double> best1bin_trial(
    const std::vector<std::vector<double>>& population,
    const std::vector<double>& energies, std::size_t target_index,
    const Config& config, const Bounds& bounds, Rng& rng) {
  const std::size_t np = population.size();
  if (np < 4)
    throw ConfigError("best1bin needs a population of at least 4 members");

  // r1, r2: uniform over indices != target, r1 != r2.
  std::size_t r1 = rng.below(np - 1);
  if (r1 >= target_index) ++r1;
  std::size_t r2 = rng.below(np - 2);
  const std::size_t skip_a = std::min(target_index, r1);
  const std::size_t skip_b = std::max(target_index, r1);
  if (r2 >= skip_a) ++r2;
  if (r2 >= skip_b) ++r2;

  const std::size_t best = best_index(energies);
  std::vector<double> trial = binomial_crossover(
      best1_donor(population[best], population[r1], population[r2],
                  config.mutation_factor),
      population[target_index], config.recombination, rng);
  for (std::size_t d = 0; d < bounds.size(); ++d)
    trial[d] = bounds.clamp(d, trial[d]);
  return trial;
}

using Objective = std::function<double(const std::vector<int>&)>;
using StopPredicate = std::function<bool(double /*best_energy*/)>;

// Differential-evolution minimization over a box-bounded integer domain with
// Latin hypercube initialization, best1bin trial generation, greedy
// replacement (trial replaces the target when its energy is <= the target's)
// and relative-tolerance convergence.
//
// The stored population is real-valued; vectors are rounded half away from
// zero and clamped whenever the objective is evaluated, so the objective only
// ever sees integral in-bounds vectors. Convergence is checked after the
// initial evaluation and after every generation. The optional early_stop
// predicate is checked against the best energy at the same points. Trials are
// evaluated and replacements applied in target-index order; the best member
// used for mutation refreshes immediately whenever a replacement changes it.
//
// Identical (objective, bounds, config) including the seed give identical
// results: the RNG is split into one stream for initialization (stream 0) and
// one per generation (stream g for generation g).
inline RunResult minimize(const Objective& objective, const Bounds& bounds,
                          const Config& config, const StopPredicate& early_stop = {}) {
  config.validate();
  if (bounds.size() == 0) throw ConfigError("bounds need at least one dimension");
  const std::size_t np = static_cast<std::size_t>(config.population_size);

  RunResult result;
  auto evaluate = [&](const std::vector<double>& v, int iteration) {
    const std::vector<int> rounded = bounds.round_vector(v);
    try {
      const double e = objective(rounded);
      ++result.evaluations;
      return e;
    } catch (const std::exception& ex) {
      throw RunAborted(ex.what(), iteration, result.trace, result.evaluations);
    }
  };

  Rng init_rng(substream_seed(config.rng_seed, 0));
  const auto initial = lhs_init(bounds, config.population_size, init_rng);
  std::vector<std::vector<double>> population(np, std::vector<double>(bounds.size()));
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t d = 0; d < bounds.size(); ++d)
      population[i][d] = static_cast<double>(initial[i][d]);

  std::vector<double> energies(np);
  for (std::size_t i = 0; i < np; ++i) energies[i] = evaluate(population[i], 0);

  std::size_t best = best_index(energies);
  result.trace.push_back(energies[best]);

  auto finish = [&]() {
    result.best_vector = bounds.round_vector(population[best]);
    result.best_energy = energies[best];
    return result;
  };

  if (check_convergence(energies, config.tolerance)) {
    result.converged_after_initial = true;
    return finish();
  }
  if (early_stop && early_stop(energies[best])) return finish();

  for (int gen = 1; gen <= config.max_iterations; ++gen) {
    Rng gen_rng(substream_seed(config.rng_seed, static_cast<std::uint64_t>(gen)));
    for (std::size_t target = 0; target < np; ++target) {
      const std::vector<double> trial =
          best1bin_trial(population, energies, target, config, bounds, gen_rng);
      const double e = evaluate(trial, gen);
      if (e <= energies[target]) {
        population[target] = trial;
        energies[target] = e;
        best = best_index(energies);
      }
    }
    result.iterations_completed = gen;
    result.trace.push_back(energies[best]);
    if (check_convergence(energies, config.tolerance)) break;
    if (early_stop && early_stop(energies[best])) break;
  }
  return finish();
}

}  // namespace onepixel::de
