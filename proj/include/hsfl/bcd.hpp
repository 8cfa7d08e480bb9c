#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hsfl/convergence.hpp"
#include "hsfl/ma_solver.hpp"
#include "hsfl/ms_solver.hpp"
#include "hsfl/plan.hpp"

namespace hsfl {

struct BcdOptions {
  double epsilon_rel = 1e-6;  // relative objective-change stopping threshold
  int max_outer = 50;
  MsMethod method = MsMethod::enumeration;
  MaOptions ma;
  MsOptions ms;
};

struct BcdIterate {
  int iteration = 0;
  CutVector cut;
  AggSchedule intervals;
  double objective = 0.0;
  double wall_seconds = 0.0;  // informational only, never serialized
};

struct BcdTrace {
  std::vector<BcdIterate> iterations;
  CutVector final_cut;
  AggSchedule final_intervals;
  double final_objective = 0.0;
  long long predicted_rounds = 0;
  double predicted_total_latency = 0.0;
  bool converged = false;
  double threshold = 0.0;
};

// Alternating exact block solves: intervals for a fixed cut, then the cut for
// fixed intervals, until the objective change falls below the threshold.
// Defaults: the memory-feasible cut with the smallest per-round latency and
// an all-ones schedule, which is feasible whenever anything is.
BcdTrace run_bcd(const ConvergenceParams& params, const ModelProfile& profile,
                 const Topology& topo, int batch, const BcdOptions& opts = {},
                 std::optional<CutVector> init_cut = std::nullopt,
                 std::optional<AggSchedule> init_intervals = std::nullopt);

// Benchmark plans: random intervals with a given cut, and a random admissible
// cut with given intervals.
AggSchedule random_ma_baseline(std::uint64_t seed, int num_bottom_tiers, int lo, int hi);
CutVector random_ms_baseline(std::uint64_t seed, int num_layers, int num_tiers, int lo, int hi);

}  // namespace hsfl
