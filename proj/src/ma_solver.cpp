#include "hsfl/ma_solver.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "hsfl/errors.hpp"

namespace hsfl {

namespace {

double product(const std::vector<double>& v) {
  double p = 1.0;
  for (double x : v) p *= x;
  return p;
}

// Accuracy margin left once every free tier except `coord` spends its drift.
double margin_excluding(const MaFreeProblem& prob, const std::vector<double>& intervals,
                        int coord) {
  const double coeff = 4.0 * prob.beta * prob.beta * prob.gamma * prob.gamma;
  double margin = prob.margin;
  for (std::size_t m = 0; m < intervals.size(); ++m) {
    if (static_cast<int>(m) == coord) continue;
    margin -= coeff * prob.second_moment[m] * intervals[m] * intervals[m];
  }
  return margin;
}

// Coordinate cubic with the shared positive factor divided out; same sign and
// roots as ma_stationarity.
double scaled_stationarity(const MaFreeProblem& prob, const std::vector<double>& intervals,
                           int coord, double value) {
  const auto t = static_cast<std::size_t>(coord);
  const double bg2 = prob.beta * prob.beta * prob.gamma * prob.gamma;
  double cost = prob.fixed_latency;
  for (std::size_t m = 0; m < intervals.size(); ++m)
    if (m != t) cost += prob.agg_latency[m] / intervals[m];
  return 8.0 * cost * bg2 * prob.second_moment[t] * value * value * value +
         12.0 * prob.agg_latency[t] * bg2 * prob.second_moment[t] * value * value -
         prob.agg_latency[t] * margin_excluding(prob, intervals, coord);
}

double scaled_stationarity_derivative(const MaFreeProblem& prob,
                                      const std::vector<double>& intervals, int coord,
                                      double value) {
  const auto t = static_cast<std::size_t>(coord);
  const double bg2 = prob.beta * prob.beta * prob.gamma * prob.gamma;
  double cost = prob.fixed_latency;
  for (std::size_t m = 0; m < intervals.size(); ++m)
    if (m != t) cost += prob.agg_latency[m] / intervals[m];
  return 24.0 * cost * bg2 * prob.second_moment[t] * value * value +
         24.0 * prob.agg_latency[t] * bg2 * prob.second_moment[t] * value;
}

// Unique positive root of the coordinate cubic, Newton with a bisection
// bracket. Returns `cap` when the root exceeds it.
double coordinate_root(const MaFreeProblem& prob, const std::vector<double>& intervals, int coord,
                       double cap) {
  const auto t = static_cast<std::size_t>(coord);
  if (prob.second_moment[t] <= 0.0) return cap;  // no drift penalty, cost alone decides
  const double margin = margin_excluding(prob, intervals, coord);
  if (!(margin > 0.0))
    throw SolverError("stationarity system left the feasible region");
  if (scaled_stationarity(prob, intervals, coord, cap) <= 0.0) return cap;

  double lo = 0.0, hi = cap;
  double x = std::clamp(intervals[t], 1e-6, cap);
  for (int it = 0; it < 200; ++it) {
    const double f = scaled_stationarity(prob, intervals, coord, x);
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    const double df = scaled_stationarity_derivative(prob, intervals, coord, x);
    double next = df > 0.0 ? x - f / df : 0.5 * (lo + hi);
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-14 * std::max(1.0, std::abs(x))) return next;
    x = next;
  }
  return x;
}

struct Candidate {
  std::vector<int> intervals;
  double objective = 0.0;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.objective != b.objective) return a.objective < b.objective;
  return a.intervals < b.intervals;
}

}  // namespace

double ma_stationarity(const MaFreeProblem& prob, const std::vector<double>& intervals,
                       int coord) {
  if (intervals.size() != prob.agg_latency.size() ||
      intervals.size() != prob.second_moment.size())
    throw InvalidArgumentError("interval vector size does not match problem");
  if (coord < 0 || coord >= static_cast<int>(intervals.size()))
    throw InvalidArgumentError("coordinate out of range");
  const auto t = static_cast<std::size_t>(coord);
  // e_m: product of the other free intervals.
  double e_t = 1.0;
  for (std::size_t m = 0; m < intervals.size(); ++m)
    if (m != t) e_t *= intervals[m];
  const double bg2 = prob.beta * prob.beta * prob.gamma * prob.gamma;
  double coupled = prob.fixed_latency * e_t;
  for (std::size_t m = 0; m < intervals.size(); ++m)
    if (m != t) coupled += prob.agg_latency[m] * e_t / intervals[m];
  const double v = intervals[t];
  return 8.0 * coupled * e_t * bg2 * prob.second_moment[t] * v * v * v +
         12.0 * prob.agg_latency[t] * e_t * e_t * bg2 * prob.second_moment[t] * v * v -
         prob.agg_latency[t] * e_t * e_t * margin_excluding(prob, intervals, coord);
}

std::vector<double> solve_stationary_intervals(const MaFreeProblem& prob, double tol,
                                               int max_iter, double cap, int* iterations_out,
                                               bool* converged_out) {
  const std::size_t k = prob.agg_latency.size();
  if (prob.second_moment.size() != k)
    throw InvalidArgumentError("problem vectors must have equal length");
  if (!(prob.margin > 0.0))
    throw InfeasibleError("accuracy margin non-positive before any drift", prob.margin);
  if (iterations_out) *iterations_out = 0;
  if (converged_out) *converged_out = true;
  if (k == 0) return {};

  const double bg2 = prob.beta * prob.beta * prob.gamma * prob.gamma;
  // Decoupled initial guess: root of each cubic ignoring the other tiers.
  std::vector<double> roots(k, 1.0);
  std::vector<double> ones(k, 1.0);
  for (std::size_t t = 0; t < k; ++t) {
    std::vector<double> init = ones;
    roots[t] = coordinate_root(prob, init, static_cast<int>(t), cap);
  }
  // Scale back if the joint guess overspends the margin.
  double spent = 0.0;
  for (std::size_t t = 0; t < k; ++t)
    spent += 4.0 * bg2 * prob.second_moment[t] * roots[t] * roots[t];
  if (spent >= prob.margin) {
    const double shrink = std::sqrt(0.5 * prob.margin / spent);
    for (auto& r : roots) r = std::max(1.0, r * shrink);
  }

  bool converged = false;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    std::vector<double> next(k);
    for (std::size_t t = 0; t < k; ++t)
      next[t] = coordinate_root(prob, roots, static_cast<int>(t), cap);
    double delta = 0.0;
    for (std::size_t t = 0; t < k; ++t)
      delta = std::max(delta, std::abs(next[t] - roots[t]) / std::max(1.0, std::abs(roots[t])));
    roots = std::move(next);
    if (delta < tol) {
      converged = true;
      ++iter;
      break;
    }
  }
  if (iterations_out) *iterations_out = iter;
  if (converged_out) *converged_out = converged;
  if (!converged)
    throw SolverError("interval stationarity solve did not converge in " +
                      std::to_string(max_iter) + " sweeps");
  return roots;
}

std::vector<std::vector<int>> round_candidates(const std::vector<double>& roots) {
  std::vector<std::vector<int>> per_tier;
  for (double r : roots) {
    if (!std::isfinite(r)) throw InvalidArgumentError("continuous root must be finite");
    const int lo = std::max(2, static_cast<int>(std::floor(r)));
    const int hi = std::max(2, static_cast<int>(std::ceil(r)));
    per_tier.push_back(lo == hi ? std::vector<int>{lo} : std::vector<int>{lo, hi});
  }
  std::vector<std::vector<int>> out{{}};
  for (const auto& choices : per_tier) {
    std::vector<std::vector<int>> grown;
    for (const auto& prefix : out)
      for (int c : choices) {
        auto next = prefix;
        next.push_back(c);
        grown.push_back(std::move(next));
      }
    out = std::move(grown);
  }
  return out;
}

MaSolution solve_ma(const ObjectiveConstants& consts, const std::vector<bool>& single_entity_tier,
                    const MaOptions& opts) {
  const auto tiers = consts.per_agg_latency.size();
  if (single_entity_tier.size() != tiers)
    throw InvalidArgumentError("single-entity mask size does not match constants");
  if (!(consts.margin > 0.0))
    throw InfeasibleError("accuracy margin non-positive: no schedule is feasible",
                          consts.margin);

  std::vector<int> selectable;  // tiers we may leave free
  for (std::size_t m = 0; m < tiers; ++m)
    if (!single_entity_tier[m]) selectable.push_back(static_cast<int>(m));

  std::optional<Candidate> best;
  MaSolution solution{AggSchedule(std::vector<int>(tiers, 1)), 0.0, {}, {}, {}, 0, true};

  const auto subsets = 1u << selectable.size();
  for (std::uint32_t mask = 0; mask < subsets; ++mask) {
    std::vector<bool> pinned(tiers, false);
    for (std::size_t m = 0; m < tiers; ++m)
      if (single_entity_tier[m]) pinned[m] = true;
    for (std::size_t i = 0; i < selectable.size(); ++i)
      if (mask & (1u << i)) pinned[static_cast<std::size_t>(selectable[i])] = true;

    MaFreeProblem prob;
    prob.margin = consts.margin;
    prob.beta = consts.beta;
    prob.gamma = consts.gamma;
    prob.fixed_latency = consts.per_round_latency;
    std::vector<int> free_tiers;
    for (std::size_t m = 0; m < tiers; ++m) {
      if (pinned[m]) {
        prob.fixed_latency += consts.per_agg_latency[m];  // paid every round
      } else {
        free_tiers.push_back(static_cast<int>(m));
        prob.agg_latency.push_back(consts.per_agg_latency[m]);
        prob.second_moment.push_back(consts.tier_second_moment[m]);
      }
    }

    int iters = 0;
    bool conv = true;
    std::vector<double> roots;
    try {
      roots = solve_stationary_intervals(prob, opts.tol, opts.max_iter,
                                         static_cast<double>(opts.interval_cap), &iters, &conv);
    } catch (const SolverError&) {
      continue;  // this subset has no interior stationary point worth rounding
    }

    for (const auto& cand : round_candidates(roots)) {
      std::vector<int> intervals(tiers, 1);
      for (std::size_t i = 0; i < cand.size(); ++i)
        intervals[static_cast<std::size_t>(free_tiers[i])] = cand[i];
      const AggSchedule sched(intervals);
      if (!(feasibility_margin(consts, sched) > 0.0)) continue;
      Candidate c{intervals, theta_prime(consts, sched)};
      if (!best || better(c, *best)) {
        best = c;
        solution.fixed_to_one.clear();
        for (std::size_t m = 0; m < tiers; ++m)
          if (pinned[m]) solution.fixed_to_one.push_back(static_cast<int>(m));
        solution.free_tiers = free_tiers;
        solution.continuous_roots = roots;
        solution.iterations = iters;
        solution.converged = conv;
      }
    }
  }

  if (!best) throw InfeasibleError("no feasible aggregation schedule found", consts.margin);

  // Integer polish: the rounded stationary point can sit one step away from
  // the integer optimum, so descend coordinate-wise until no move improves.
  bool moved = true;
  while (moved) {
    moved = false;
    for (std::size_t m = 0; m < tiers; ++m) {
      for (int delta : {-1, +1}) {
        auto trial = best->intervals;
        trial[m] += delta;
        if (trial[m] < 1 || trial[m] > opts.interval_cap) continue;
        if (single_entity_tier[m] && trial[m] > 1) continue;
        const AggSchedule sched(trial);
        if (!(feasibility_margin(consts, sched) > 0.0)) continue;
        const double obj = theta_prime(consts, sched);
        if (obj < best->objective ||
            (obj == best->objective && trial < best->intervals)) {
          best->intervals = trial;
          best->objective = obj;
          moved = true;
        }
      }
    }
  }

  solution.intervals = AggSchedule(best->intervals);
  solution.objective = best->objective;
  return solution;
}

MaSolution solve_ma(const ObjectiveConstants& consts, const Topology& topo,
                    const MaOptions& opts) {
  std::vector<bool> single(static_cast<std::size_t>(topo.num_tiers() - 1));
  for (int m = 0; m < topo.num_tiers() - 1; ++m)
    single[static_cast<std::size_t>(m)] = topo.entities_in_tier(m) == 1;
  return solve_ma(consts, single, opts);
}

}  // namespace hsfl
