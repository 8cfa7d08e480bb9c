#include <doctest.h>

#include <cmath>

#include "hsfl/errors.hpp"
#include "hsfl/ma_solver.hpp"
#include "hsfl/rng.hpp"
#include "oracles.hpp"

using namespace hsfl;

namespace {

// Feasible instance with interior continuous roots: drift masses are sized
// from target roots so the optimum stays well inside the test grid.
ObjectiveConstants random_instance(std::uint64_t seed, int num_tiers) {
  Rng rng(seed);
  ObjectiveConstants c;
  c.beta = rng.uniform(0.5, 2.0);
  c.gamma = rng.uniform(0.05, 0.5) / c.beta;
  c.vartheta = rng.uniform(0.5, 5.0);
  c.per_round_latency = rng.uniform(0.2, 3.0);
  c.margin = rng.uniform(0.5, 2.0);
  const double bg2 = c.beta * c.beta * c.gamma * c.gamma;
  for (int m = 0; m < num_tiers - 1; ++m) {
    const double b = rng.uniform(0.01, 1.5);
    const double root = rng.uniform(1.2, 20.0);
    c.per_agg_latency.push_back(b);
    c.tier_second_moment.push_back(b * c.margin /
                                   (8.0 * c.per_round_latency * bg2 * root * root * root));
  }
  return c;
}

MaFreeProblem free_problem(const ObjectiveConstants& c) {
  MaFreeProblem p;
  p.fixed_latency = c.per_round_latency;
  p.agg_latency = c.per_agg_latency;
  p.second_moment = c.tier_second_moment;
  p.margin = c.margin;
  p.beta = c.beta;
  p.gamma = c.gamma;
  return p;
}

double bisect_cubic(double a3, double a2, double a0, double lo, double hi) {
  auto f = [&](double x) { return a3 * x * x * x + a2 * x * x + a0; };
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("stationarity residual closed forms") {
  MaFreeProblem p;
  p.fixed_latency = 1.0;
  p.agg_latency = {1.0};
  p.second_moment = {1.0};
  p.margin = 1000.0;
  p.beta = p.gamma = 1.0;

  SUBCASE("value at zero interval") {
    // -e^2 * b * margin with a single free tier (e = 1).
    CHECK(ma_stationarity(p, {0.0}, 0) == doctest::Approx(-1000.0).epsilon(1e-15));
  }
  SUBCASE("single-tier cubic root near 4.5") {
    // 8I^3 + 12I^2 - 1000 = 0, root via an independent bisection.
    const double expected = bisect_cubic(8.0, 12.0, -1000.0, 0.0, 10.0);
    CHECK(expected == doctest::Approx(4.5).epsilon(0.02));
    int iters = 0;
    bool conv = false;
    const auto roots = solve_stationary_intervals(p, 1e-9, 200, 512.0, &iters, &conv);
    REQUIRE(roots.size() == 1);
    CHECK(conv);
    CHECK(roots[0] == doctest::Approx(expected).epsilon(1e-9));
    CHECK(std::abs(ma_stationarity(p, roots, 0)) <= 1e-9 * 1000.0);
  }
  SUBCASE("strictly increasing in its own coordinate") {
    for (double at : {0.5, 1.0, 2.0, 4.0, 8.0, 32.0})
      CHECK(ma_stationarity(p, {at + 1.0}, 0) > ma_stationarity(p, {at}, 0));
  }
}

TEST_CASE("two symmetric tiers share a root") {
  ObjectiveConstants c;
  c.beta = 1.0;
  c.gamma = 0.1;
  c.vartheta = 1.0;
  c.per_round_latency = 1.0;
  c.margin = 2.0;
  c.per_agg_latency = {0.4, 0.4};
  c.tier_second_moment = {0.7, 0.7};
  const auto p = free_problem(c);
  int iters = 0;
  bool conv = false;
  const auto roots = solve_stationary_intervals(p, 1e-9, 200, 512.0, &iters, &conv);
  REQUIRE(roots.size() == 2);
  CHECK(conv);
  CHECK(roots[0] == doctest::Approx(roots[1]).epsilon(1e-9));
}

TEST_CASE("larger aggregation cost pushes the root out in the equal-drift regime") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    ObjectiveConstants c;
    c.beta = rng.uniform(0.5, 2.0);
    c.gamma = rng.uniform(0.05, 0.3) / c.beta;
    c.vartheta = 1.0;
    c.per_round_latency = rng.uniform(0.5, 2.0);
    c.margin = rng.uniform(0.5, 2.0);
    const double d = rng.uniform(1e-4, 1e-2);
    const double b_small = rng.uniform(0.01, 0.4);
    const double b_large = b_small + rng.uniform(0.05, 1.0);
    c.per_agg_latency = {b_large, b_small};
    c.tier_second_moment = {d, d};
    const auto roots = solve_stationary_intervals(free_problem(c), 1e-9, 200, 1e6, nullptr,
                                                  nullptr);
    CHECK(roots[0] > roots[1]);
  }
}

TEST_CASE("residual bracket at the converged roots") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const int M = 2 + static_cast<int>(seed % 3);
    const auto c = random_instance(seed * 31 + 5, M);
    const auto p = free_problem(c);
    const auto roots = solve_stationary_intervals(p, 1e-9, 200, 512.0, nullptr, nullptr);
    for (std::size_t t = 0; t < roots.size(); ++t) {
      if (roots[t] >= 512.0) continue;  // capped, not a root
      const double lo = roots[t] * (1.0 - 1e-6);
      const double hi = roots[t] * (1.0 + 1e-6);
      auto at = roots;
      at[t] = lo;
      CHECK(ma_stationarity(p, at, static_cast<int>(t)) <= 0.0);
      at[t] = hi;
      CHECK(ma_stationarity(p, at, static_cast<int>(t)) >= 0.0);
    }
  }
}

TEST_CASE("rounding candidates") {
  SUBCASE("floor/ceil product") {
    const auto cands = round_candidates({4.5, 2.2});
    REQUIRE(cands.size() == 4);
    CHECK(cands[0] == std::vector<int>{4, 2});
    CHECK(cands[1] == std::vector<int>{4, 3});
    CHECK(cands[2] == std::vector<int>{5, 2});
    CHECK(cands[3] == std::vector<int>{5, 3});
  }
  SUBCASE("integer root collapses") {
    const auto cands = round_candidates({3.0});
    REQUIRE(cands.size() == 1);
    CHECK(cands[0] == std::vector<int>{3});
  }
  SUBCASE("clamped to the free-tier domain") {
    const auto cands = round_candidates({1.2});
    REQUIRE(cands.size() == 1);
    CHECK(cands[0] == std::vector<int>{2});
  }
}

TEST_CASE("zero aggregation cost pins the interval to one") {
  ObjectiveConstants c;
  c.beta = 1.0;
  c.gamma = 0.1;
  c.vartheta = 1.0;
  c.per_round_latency = 1.0;
  c.margin = 1.0;
  c.per_agg_latency = {0.0};
  c.tier_second_moment = {0.5};
  const auto sol = solve_ma(c, std::vector<bool>{false});
  CHECK(sol.intervals.intervals() == std::vector<int>{1});
  CHECK(sol.objective == doctest::Approx(theta_prime(c, sol.intervals)));
}

TEST_CASE("single-entity tiers are always pinned to one") {
  ObjectiveConstants c;
  c.beta = 1.0;
  c.gamma = 0.1;
  c.vartheta = 1.0;
  c.per_round_latency = 1.0;
  c.margin = 1.0;
  c.per_agg_latency = {0.3, 0.3};
  c.tier_second_moment = {1e-3, 1e-3};
  const auto sol = solve_ma(c, std::vector<bool>{false, true});
  CHECK(sol.intervals.interval(1) == 1);
  CHECK(sol.intervals.interval(0) > 1);
}

TEST_CASE("solver matches exhaustive grid search") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    const int M = 2 + static_cast<int>(seed % 3);
    const auto c = random_instance(seed * 977 + 13, M);
    const auto sol = solve_ma(c, std::vector<bool>(static_cast<std::size_t>(M - 1), false));
    const auto [best, argmin] = oracle::grid_search_ma(c, 64);
    CHECK(sol.objective == doctest::Approx(best).epsilon(1e-9));
    CHECK(sol.intervals.intervals() == argmin);
    CHECK(sol.objective == doctest::Approx(theta_prime(c, sol.intervals)).epsilon(1e-12));
    ++checked;
  }
  CHECK(checked >= 20);
}

TEST_CASE("never worse than the all-ones schedule") {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const int M = 2 + static_cast<int>(seed % 3);
    const auto c = random_instance(seed, M);
    const auto sol = solve_ma(c, std::vector<bool>(static_cast<std::size_t>(M - 1), false));
    const AggSchedule ones(std::vector<int>(static_cast<std::size_t>(M - 1), 1));
    CHECK(sol.objective <= theta_prime(c, ones) * (1.0 + 1e-12));
  }
}

TEST_CASE("infeasible margin is rejected up front") {
  ObjectiveConstants c;
  c.beta = 1.0;
  c.gamma = 0.1;
  c.vartheta = 1.0;
  c.per_round_latency = 1.0;
  c.margin = -0.5;
  c.per_agg_latency = {0.3};
  c.tier_second_moment = {0.1};
  CHECK_THROWS_AS(solve_ma(c, std::vector<bool>{false}), InfeasibleError);
}

TEST_CASE("zero drift mass runs to the interval cap") {
  ObjectiveConstants c;
  c.beta = 1.0;
  c.gamma = 0.1;
  c.vartheta = 1.0;
  c.per_round_latency = 1.0;
  c.margin = 1.0;
  c.per_agg_latency = {0.5};
  c.tier_second_moment = {0.0};
  MaOptions opts;
  opts.interval_cap = 64;
  const auto sol = solve_ma(c, std::vector<bool>{false}, opts);
  CHECK(sol.intervals.interval(0) == 64);
}
