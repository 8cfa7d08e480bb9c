#include "hsfl/bcd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "hsfl/errors.hpp"
#include "hsfl/latency.hpp"
#include "hsfl/rng.hpp"

namespace hsfl {

namespace {

CutVector min_latency_feasible_cut(const ModelProfile& profile, const Topology& topo,
                                   int batch) {
  const auto cuts = enumerate_cuts(profile.num_layers(), topo.num_tiers());
  const CutVector* best = nullptr;
  double best_latency = 0.0;
  for (const auto& cut : cuts) {
    if (!memory_feasible(profile, topo, cut, batch)) continue;
    const double latency = split_round_latency(profile, topo, cut, batch);
    if (!best || latency < best_latency) {
      best = &cut;
      best_latency = latency;
    }
  }
  if (!best)
    throw InfeasibleError("no memory-feasible cut exists for this profile and topology", 0.0);
  return *best;
}

}  // namespace

BcdTrace run_bcd(const ConvergenceParams& params, const ModelProfile& profile,
                 const Topology& topo, int batch, const BcdOptions& opts,
                 std::optional<CutVector> init_cut, std::optional<AggSchedule> init_intervals) {
  params.validate();
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(clock::now() - start).count();
  };

  CutVector cut = init_cut ? *init_cut : min_latency_feasible_cut(profile, topo, batch);
  AggSchedule intervals = init_intervals
                              ? *init_intervals
                              : AggSchedule(std::vector<int>(static_cast<std::size_t>(topo.num_tiers() - 1), 1));
  if (cut.num_layers() != profile.num_layers() || cut.num_tiers() != topo.num_tiers())
    throw InvalidArgumentError("initial cut does not match the profile/topology shape");
  if (intervals.size() != topo.num_tiers() - 1)
    throw InvalidArgumentError("initial schedule does not match the topology shape");
  if (!memory_feasible(profile, topo, cut, batch)) {
    // Repair rule: fall back to the default initialization.
    cut = min_latency_feasible_cut(profile, topo, batch);
  }

  auto consts = build_objective_constants(params, profile, topo, cut, batch);
  double objective = theta_prime(consts, intervals);  // throws if nothing is feasible

  std::vector<BcdIterate> iterates;
  bool converged = false;
  for (int outer = 1; outer <= opts.max_outer; ++outer) {
    const double previous = objective;

    // Interval block. Keep the incumbent if the solver's candidate set
    // happens not to contain anything better.
    const MaSolution ma = solve_ma(consts, topo, opts.ma);
    if (ma.objective <= objective) {
      intervals = ma.intervals;
      objective = ma.objective;
    }

    // Cut block.
    const MsSolution ms =
        solve_ms(params, profile, topo, intervals, batch, opts.method, opts.ms);
    if (ms.objective <= objective) {
      cut = ms.cut;
      objective = ms.objective;
      consts = build_objective_constants(params, profile, topo, cut, batch);
    }

    iterates.push_back({outer, cut, intervals, objective, elapsed()});
    if (std::abs(previous - objective) <= opts.epsilon_rel * std::abs(previous)) {
      converged = true;
      break;
    }
  }

  const long long rounds = rounds_for_accuracy(params, profile, cut, intervals);
  return BcdTrace{std::move(iterates),
                  cut,
                  intervals,
                  objective,
                  rounds,
                  total_latency(profile, topo, cut, intervals, batch, rounds),
                  converged,
                  opts.epsilon_rel};
}

AggSchedule random_ma_baseline(std::uint64_t seed, int num_bottom_tiers, int lo, int hi) {
  if (num_bottom_tiers < 1 || lo < 1 || hi < lo)
    throw InvalidArgumentError("invalid interval baseline range");
  Rng rng(seed);
  std::vector<int> intervals(static_cast<std::size_t>(num_bottom_tiers));
  for (auto& v : intervals) v = static_cast<int>(rng.uniform_int(lo, hi));
  return AggSchedule(std::move(intervals));
}

CutVector random_ms_baseline(std::uint64_t seed, int num_layers, int num_tiers, int lo, int hi) {
  const int k = num_tiers - 1;
  lo = std::max(lo, 1);
  hi = std::min(hi, num_layers - 1);
  if (k < 1 || hi - lo + 1 < k)
    throw InvalidArgumentError("admissible cut range cannot host " + std::to_string(k) +
                               " distinct cuts");
  Rng rng(seed);
  auto picks = rng.sample_without_replacement(hi - lo + 1, k);
  std::vector<int> cuts(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < cuts.size(); ++i) cuts[i] = lo + picks[i];
  std::sort(cuts.begin(), cuts.end());
  return CutVector(std::move(cuts), num_layers);
}

}  // namespace hsfl
