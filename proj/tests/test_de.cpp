#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <vector>

#include "onepixel/de.hpp"
#include "onepixel/errors.hpp"
#include "onepixel/rng.hpp"

using namespace onepixel;
using Catch::Approx;

TEST_CASE("bounds validate their dimensions", "[de]") {
  CHECK_THROWS_AS(de::Bounds(std::vector<std::pair<int, int>>{}), ConfigError);
  CHECK_THROWS_AS(de::Bounds({{5, 4}}), ConfigError);
  CHECK_NOTHROW(de::Bounds({{5, 5}}));
}

TEST_CASE("round_clamp rounds half away from zero then clamps", "[de]") {
  const de::Bounds b({{-10, 10}});
  CHECK(b.round_clamp(0, 2.5) == 3);
  CHECK(b.round_clamp(0, -2.5) == -3);
  CHECK(b.round_clamp(0, 0.49) == 0);
  CHECK(b.round_clamp(0, 0.5) == 1);
  CHECK(b.round_clamp(0, -0.5) == -1);
  CHECK(b.round_clamp(0, 15.0) == 10);
  CHECK(b.round_clamp(0, -15.0) == -10);

  const de::Bounds box({{0, 31}, {0, 255}});
  CHECK(box.round_vector({31.7, -3.0}) == std::vector<int>{31, 0});
  CHECK(box.contains({0, 255}));
  CHECK_FALSE(box.contains({0, 256}));
  CHECK_FALSE(box.contains({0}));
}

TEST_CASE("config defaults and validation", "[de]") {
  const de::Config c;
  CHECK(c.population_size == 200);
  CHECK(c.mutation_factor == 0.5);
  CHECK(c.recombination == 0.7);
  CHECK(c.max_iterations == 100);
  CHECK(c.tolerance == 0.01);
  CHECK_NOTHROW(c.validate());

  de::Config bad = c;
  bad.population_size = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.mutation_factor = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.recombination = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.recombination = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.max_iterations = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.tolerance = -1e-9;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("convergence rule on hand-checked populations", "[de]") {
  // std {0.96, 0.95, 0.97} = sqrt(2e-4 / 3) ~= 0.00816 <= 0.01 * 0.96.
  CHECK(de::check_convergence({0.96, 0.95, 0.97}, 0.01));
  // std {0.1, 0.9} = 0.4, far above 0.01 * 0.5.
  CHECK_FALSE(de::check_convergence({0.1, 0.9}, 0.01));
  // |mean| makes the rule sign-independent.
  CHECK(de::check_convergence({-0.96, -0.95, -0.97}, 0.01));
  // Zero tolerance only accepts a fully collapsed population.
  CHECK(de::check_convergence({0.5, 0.5, 0.5}, 0.0));
  CHECK_FALSE(de::check_convergence({0.5, 0.5000001}, 0.0));
  CHECK_THROWS_AS(de::check_convergence({}, 0.01), std::invalid_argument);
}

TEST_CASE("latin hypercube fills every stratum exactly once per dimension", "[de]") {
  const de::Bounds bounds({{0, 9}, {-5, 14}, {100, 355}});
  const int np = 40;
  Rng rng(77);
  const auto population = de::lhs_init_continuous(bounds, np, rng);
  REQUIRE(population.size() == static_cast<std::size_t>(np));

  for (std::size_t d = 0; d < bounds.size(); ++d) {
    const double low = bounds.low(d);
    const double span = bounds.high(d) + 1.0 - low;
    std::set<int> seen;
    for (const auto& member : population) {
      REQUIRE(member.size() == bounds.size());
      const double v = member[d];
      REQUIRE(v >= low);
      REQUIRE(v < low + span);
      seen.insert(static_cast<int>(std::floor((v - low) * np / span)));
    }
    CHECK(seen.size() == static_cast<std::size_t>(np));
  }
}

TEST_CASE("integer lhs with one stratum per value covers the range", "[de]") {
  // Span 10 over np 10: stratum i floors to exactly i.
  const de::Bounds bounds({{0, 9}});
  Rng rng(3);
  const auto population = de::lhs_init(bounds, 10, rng);
  std::set<int> values;
  for (const auto& member : population) values.insert(member[0]);
  CHECK(values == std::set<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
}

TEST_CASE("binomial crossover honours CR extremes", "[de]") {
  const std::vector<double> donor(8, 1.0);
  const std::vector<double> target(8, 0.0);
  Rng rng(11);

  for (int trial = 0; trial < 50; ++trial) {
    const auto t0 = de::binomial_crossover(donor, target, 0.0, rng);
    CHECK(std::count(t0.begin(), t0.end(), 1.0) == 1);  // only j_rand
    const auto t1 = de::binomial_crossover(donor, target, 1.0, rng);
    CHECK(std::count(t1.begin(), t1.end(), 1.0) == 8);
  }
}

TEST_CASE("crossover mixes both parents at intermediate CR", "[de]") {
  const std::vector<double> donor(16, 1.0);
  const std::vector<double> target(16, 0.0);
  Rng rng(12);
  long donor_picks = 0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    const auto mix = de::binomial_crossover(donor, target, 0.5, rng);
    donor_picks += std::count(mix.begin(), mix.end(), 1.0);
  }
  // Expected fraction (np-1)/np * CR + 1/np per dim; ~0.53 for 16 dims.
  const double fraction = static_cast<double>(donor_picks) / (trials * 16.0);
  CHECK(fraction == Approx(0.53125).margin(0.02));
}

TEST_CASE("best1bin samples distinct members that exclude the target", "[de]") {
  // One dimension; member i holds 4^i so donor = best + F*(r1-r2) decodes to
  // the (r1, r2) pair uniquely. Member 0 is best, CR irrelevant at 1 dim.
  const std::size_t np = 6;
  std::vector<std::vector<double>> population(np);
  std::vector<double> energies(np);
  for (std::size_t i = 0; i < np; ++i) {
    population[i] = {std::pow(4.0, static_cast<double>(i))};
    energies[i] = static_cast<double>(i);
  }
  const de::Bounds bounds({{-100000, 100000}});
  de::Config config;
  config.population_size = static_cast<int>(np);
  config.mutation_factor = 0.5;

  std::map<double, std::pair<std::size_t, std::size_t>> decode;
  for (std::size_t a = 0; a < np; ++a)
    for (std::size_t b = 0; b < np; ++b)
      if (a != b)
        decode[1.0 + 0.5 * (population[a][0] - population[b][0])] = {a, b};

  Rng rng(909);
  for (std::size_t target = 0; target < np; ++target) {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (int draw = 0; draw < 400; ++draw) {
      const auto trial = de::best1bin_trial(population, energies, target,
                                            config, bounds, rng);
      auto it = decode.find(trial[0]);
      REQUIRE(it != decode.end());
      const auto [r1, r2] = it->second;
      CHECK(r1 != target);
      CHECK(r2 != target);
      CHECK(r1 != r2);
      seen.insert(it->second);
    }
    // All 5*4 = 20 admissible ordered pairs show up.
    CHECK(seen.size() == 20);
  }
}

namespace {

double sphere(const std::vector<int>& v, const std::vector<int>& center) {
  double sum = 0;
  for (std::size_t d = 0; d < v.size(); ++d) {
    const double diff = v[d] - center[d];
    sum += diff * diff;
  }
  return sum;
}

}  // namespace

TEST_CASE("minimize finds the exact integer optimum of a sphere", "[de]") {
  const std::vector<int> center{3, -2, 7};
  const de::Bounds bounds({{-10, 10}, {-10, 10}, {-10, 10}});
  de::Config config;
  config.population_size = 30;
  config.max_iterations = 60;
  config.tolerance = 0;
  config.rng_seed = 42;

  const auto result = de::minimize(
      [&](const std::vector<int>& v) { return sphere(v, center); }, bounds, config);

  CHECK(result.best_vector == center);
  CHECK(result.best_energy == 0.0);
  CHECK(result.evaluations ==
        static_cast<std::size_t>(30 * (1 + result.iterations_completed)));
  REQUIRE(result.trace.size() ==
          static_cast<std::size_t>(result.iterations_completed + 1));
  for (std::size_t i = 1; i < result.trace.size(); ++i)
    CHECK(result.trace[i] <= result.trace[i - 1]);
}

TEST_CASE("identical seeds give identical runs", "[de]") {
  const de::Bounds bounds({{0, 31}, {0, 31}, {0, 255}});
  de::Config config;
  config.population_size = 20;
  config.max_iterations = 15;
  config.tolerance = 0;
  config.rng_seed = 7;
  auto objective = [](const std::vector<int>& v) {
    return std::abs(v[0] - 13) + std::abs(v[1] - 4) + std::abs(v[2] - 200) * 0.01;
  };

  const auto a = de::minimize(objective, bounds, config);
  const auto b = de::minimize(objective, bounds, config);
  CHECK(a.best_vector == b.best_vector);
  CHECK(a.best_energy == b.best_energy);
  CHECK(a.trace == b.trace);
  CHECK(a.evaluations == b.evaluations);

  config.rng_seed = 8;
  const auto c = de::minimize(objective, bounds, config);
  CHECK((a.trace != c.trace || a.best_vector != c.best_vector));
}

TEST_CASE("a flat objective converges on the initial population", "[de]") {
  de::Config config;
  config.population_size = 12;
  config.rng_seed = 1;
  const auto result = de::minimize(
      [](const std::vector<int>&) { return 0.25; }, de::Bounds({{0, 100}}), config);
  CHECK(result.converged_after_initial);
  CHECK(result.iterations_completed == 0);
  CHECK(result.best_energy == 0.25);
  REQUIRE(result.trace.size() == 1);
  CHECK(result.trace[0] == 0.25);
  CHECK(result.evaluations == 12);
}

TEST_CASE("early stop halts without convergence", "[de]") {
  de::Config config;
  config.population_size = 10;
  config.max_iterations = 50;
  config.tolerance = 0;
  config.rng_seed = 5;
  int calls = 0;
  const auto result = de::minimize(
      [&](const std::vector<int>& v) {
        ++calls;
        return static_cast<double>(v[0]);
      },
      de::Bounds({{0, 1000}}), config,
      [](double best) { return best <= 900.0; });
  // LHS spreads members across [0, 1000]; the best is far below 900 at init.
  CHECK(result.iterations_completed == 0);
  CHECK_FALSE(result.converged_after_initial);
  CHECK(result.best_energy <= 900.0);
  CHECK(result.evaluations == 10);
  CHECK(calls == 10);
}

TEST_CASE("max_iterations zero stops after the initial evaluation", "[de]") {
  de::Config config;
  config.population_size = 8;
  config.max_iterations = 0;
  config.tolerance = 0;
  config.rng_seed = 2;
  const auto result = de::minimize(
      [](const std::vector<int>& v) { return static_cast<double>(v[0]); },
      de::Bounds({{0, 50}}), config);
  CHECK(result.iterations_completed == 0);
  CHECK(result.evaluations == 8);
  CHECK(result.trace.size() == 1);
}

TEST_CASE("an objective failure surfaces as RunAborted with progress", "[de]") {
  de::Config config;
  config.population_size = 5;
  config.rng_seed = 9;
  config.tolerance = 0;

  SECTION("during the initial evaluation") {
    int calls = 0;
    try {
      de::minimize(
          [&](const std::vector<int>&) -> double {
            if (++calls == 3) throw std::runtime_error("oracle down");
            return 1.0 * calls;
          },
          de::Bounds({{0, 10}}), config);
      FAIL("expected RunAborted");
    } catch (const de::RunAborted& e) {
      CHECK(e.iteration() == 0);
      CHECK(e.evaluations() == 2);
      CHECK(e.partial_trace().empty());
      CHECK(std::string(e.what()).find("oracle down") != std::string::npos);
    }
  }

  SECTION("during a later generation") {
    int calls = 0;
    try {
      de::minimize(
          [&](const std::vector<int>& v) -> double {
            if (++calls == 8) throw std::runtime_error("oracle down");
            return static_cast<double>(v[0]);
          },
          de::Bounds({{0, 10}}), config);
      FAIL("expected RunAborted");
    } catch (const de::RunAborted& e) {
      CHECK(e.iteration() == 1);
      CHECK(e.evaluations() == 7);
      REQUIRE(e.partial_trace().size() == 1);  // init recorded, gen 1 not yet
    }
  }
}

TEST_CASE("minimize validates its inputs", "[de]") {
  de::Config config;
  config.population_size = 3;
  CHECK_THROWS_AS(de::minimize([](const std::vector<int>&) { return 0.0; },
                               de::Bounds({{0, 1}}), config),
                  ConfigError);
  CHECK_THROWS_AS(de::minimize([](const std::vector<int>&) { return 0.0; },
                               de::Bounds(), de::Config{}),
                  ConfigError);
}

TEST_CASE("objective only ever sees integral in-bounds vectors", "[de]") {
  const de::Bounds bounds({{0, 15}, {0, 15}, {0, 255}, {0, 255}, {0, 255}});
  de::Config config;
  config.population_size = 16;
  config.max_iterations = 10;
  config.tolerance = 0;
  config.rng_seed = 31;
  const auto result = de::minimize(
      [&](const std::vector<int>& v) {
        REQUIRE(bounds.contains(v));
        double sum = 0;
        for (int x : v) sum += x;
        return sum;
      },
      bounds, config);
  CHECK(bounds.contains(result.best_vector));
}
