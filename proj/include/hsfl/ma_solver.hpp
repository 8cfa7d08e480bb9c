#pragma once

#include <vector>

#include "hsfl/convergence.hpp"
#include "hsfl/plan.hpp"
#include "hsfl/topology.hpp"

namespace hsfl {

struct MaOptions {
  double tol = 1e-9;      // relative tolerance for the stationarity roots
  int max_iter = 200;     // outer Jacobi sweeps
  int interval_cap = 512; // interval assigned when the drift mass of a tier is zero
};

// Objective restricted to the free tiers: everything pinned to interval 1 is
// folded into the fixed per-round cost.
struct MaFreeProblem {
  double fixed_latency = 0.0;
  std::vector<double> agg_latency;     // per free tier
  std::vector<double> second_moment;   // per free tier
  double margin = 0.0;
  double beta = 0.0, gamma = 0.0;
};

// Derivative numerator of the amortized objective with respect to the chosen
// free-tier interval; strictly increasing in that interval, negative at 0, so
// its unique positive root is the continuous minimizer along the coordinate.
double ma_stationarity(const MaFreeProblem& prob, const std::vector<double>& intervals,
                       int coord);

// Joint continuous stationary point via per-coordinate Newton sweeps with a
// bisection bracket; tiers with zero drift mass get `cap`.
std::vector<double> solve_stationary_intervals(const MaFreeProblem& prob, double tol,
                                               int max_iter, double cap, int* iterations_out,
                                               bool* converged_out);

// Integer candidates on both sides of each continuous root, clamped to the
// free-tier domain I >= 2 (interval 1 is covered by the pinned subsets).
std::vector<std::vector<int>> round_candidates(const std::vector<double>& roots);

struct MaSolution {
  AggSchedule intervals;
  double objective = 0.0;
  std::vector<int> fixed_to_one;        // tiers pinned to interval 1
  std::vector<int> free_tiers;          // tiers solved continuously
  std::vector<double> continuous_roots; // aligned with free_tiers
  int iterations = 0;
  bool converged = true;
};

// Optimal aggregation intervals for a fixed cut: enumerates every pinned-to-1
// subset, solves the free tiers continuously, rounds, then polishes with an
// integer coordinate descent. Tiers hosted by a single entity are always
// pinned (their synchronization is free, so interval 1 dominates).
MaSolution solve_ma(const ObjectiveConstants& consts, const std::vector<bool>& single_entity_tier,
                    const MaOptions& opts = {});

MaSolution solve_ma(const ObjectiveConstants& consts, const Topology& topo,
                    const MaOptions& opts = {});

}  // namespace hsfl
