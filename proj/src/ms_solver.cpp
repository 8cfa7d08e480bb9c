#include "hsfl/ms_solver.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "hsfl/errors.hpp"
#include "hsfl/parallel.hpp"

namespace hsfl {

namespace {

// Per-cut evaluation shared by both solve paths.
struct CutEval {
  bool memory_ok = false;
  bool margin_ok = false;
  double numerator = 0.0;    // 2*vartheta * amortized latency
  double denominator = 0.0;  // gamma * accuracy margin after drift
  TightAuxiliaries tight;
};

CutEval evaluate_cut(const ConvergenceParams& params, const ModelProfile& profile,
                     const Topology& topo, const CutVector& cut, const AggSchedule& sched,
                     int batch) {
  CutEval ev;
  ev.memory_ok = memory_feasible(profile, topo, cut, batch);
  if (!ev.memory_ok) return ev;
  ev.tight = tight_auxiliaries(profile, topo, cut, batch);
  const auto consts = build_objective_constants(params, profile, topo, cut, batch);
  const double margin = feasibility_margin(consts, sched);
  ev.margin_ok = margin > 0.0;
  double amortized = ev.tight.round_latency;
  for (int m = 0; m < sched.size(); ++m)
    amortized += (ev.tight.upload[static_cast<std::size_t>(m)] +
                  ev.tight.download[static_cast<std::size_t>(m)]) /
                 static_cast<double>(sched.interval(m));
  ev.numerator = 2.0 * params.vartheta * amortized;
  ev.denominator = params.gamma * margin;
  return ev;
}

}  // namespace

std::vector<CutVector> enumerate_cuts(int num_layers, int num_tiers) {
  if (num_tiers < 2) throw InvalidArgumentError("cut enumeration needs at least 2 tiers");
  if (num_layers < num_tiers)
    throw InvalidArgumentError("model must have at least one layer per tier");
  const int k = num_tiers - 1;
  std::vector<CutVector> out;
  std::vector<int> cur(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) cur[static_cast<std::size_t>(i)] = i + 1;
  while (true) {
    out.emplace_back(cur, num_layers);
    int pos = k - 1;
    while (pos >= 0 && cur[static_cast<std::size_t>(pos)] == num_layers - 1 - (k - 1 - pos)) --pos;
    if (pos < 0) break;
    ++cur[static_cast<std::size_t>(pos)];
    for (int i = pos + 1; i < k; ++i)
      cur[static_cast<std::size_t>(i)] = cur[static_cast<std::size_t>(i - 1)] + 1;
  }
  return out;
}

bool memory_feasible(const ModelProfile& profile, const Topology& topo, const CutVector& cut,
                     int batch, int tier, int entity) {
  if (tier < 0 || tier >= topo.num_tiers() - 1)
    throw InvalidArgumentError("memory constraint applies to the bottom M-1 tiers");
  if (batch < 1) throw InvalidArgumentError("batch size must be >= 1");
  const double budget = topo.memory_bytes(tier, entity);
  if (std::isinf(budget)) return true;
  const int lo = cut.begin(tier), hi = cut.end(tier);
  const double b = static_cast<double>(batch);
  const double per_client =
      b * (profile.cumulative_bytes(hi, ByteKind::activation) -
           profile.cumulative_bytes(lo, ByteKind::activation)) +
      b * (profile.cumulative_bytes(hi, ByteKind::act_grad) -
           profile.cumulative_bytes(lo, ByteKind::act_grad)) +
      (profile.cumulative_bytes(hi, ByteKind::optimizer_state) -
       profile.cumulative_bytes(lo, ByteKind::optimizer_state)) +
      (profile.cumulative_bytes(hi, ByteKind::param) -
       profile.cumulative_bytes(lo, ByteKind::param));
  return static_cast<double>(topo.hosted_count(tier, entity)) * per_client < budget;
}

bool memory_feasible(const ModelProfile& profile, const Topology& topo, const CutVector& cut,
                     int batch) {
  for (int m = 0; m < topo.num_tiers() - 1; ++m)
    for (int j = 0; j < topo.entities_in_tier(m); ++j)
      if (!memory_feasible(profile, topo, cut, batch, m, j)) return false;
  return true;
}

TightAuxiliaries tight_auxiliaries(const ModelProfile& profile, const Topology& topo,
                                   const CutVector& cut, int batch) {
  TightAuxiliaries tight;
  tight.round_latency = split_round_latency(profile, topo, cut, batch);
  for (int m = 0; m < topo.num_tiers() - 1; ++m) {
    double up = 0.0, down = 0.0;
    for (int j = 0; j < topo.entities_in_tier(m); ++j) {
      up = std::max(up, model_transfer_latency(profile, topo, cut, m, j, TransferDirection::up));
      down = std::max(down,
                      model_transfer_latency(profile, topo, cut, m, j, TransferDirection::down));
    }
    tight.upload.push_back(up);
    tight.download.push_back(down);
  }
  return tight;
}

MsSolution solve_ms(const ConvergenceParams& params, const ModelProfile& profile,
                    const Topology& topo, const AggSchedule& sched, int batch, MsMethod method,
                    const MsOptions& opts) {
  params.validate();
  if (sched.size() != topo.num_tiers() - 1)
    throw InvalidArgumentError("schedule must cover the bottom M-1 tiers");
  const auto cuts = enumerate_cuts(profile.num_layers(), topo.num_tiers());
  std::vector<CutEval> evals(cuts.size());
  parallel_for(static_cast<int>(cuts.size()), opts.threads, [&](int i) {
    evals[static_cast<std::size_t>(i)] =
        evaluate_cut(params, profile, topo, cuts[static_cast<std::size_t>(i)], sched, batch);
  });

  int memory_ok = 0, usable = 0;
  for (const auto& ev : evals) {
    if (ev.memory_ok) ++memory_ok;
    if (ev.memory_ok && ev.margin_ok) ++usable;
  }
  if (usable == 0) {
    const int rejected_memory = static_cast<int>(cuts.size()) - memory_ok;
    const int rejected_margin = memory_ok - usable;
    throw InfeasibleError("no feasible cut: " + std::to_string(rejected_memory) +
                              " rejected by the memory constraint, " +
                              std::to_string(rejected_margin) +
                              " rejected by the accuracy margin",
                          0.0);
  }

  MsSolution sol{cuts.front(), 0.0, {}, memory_ok, method, 0};
  auto pick = [&](std::size_t i) {
    sol.cut = cuts[i];
    sol.objective = evals[i].numerator / evals[i].denominator;
    sol.tight = evals[i].tight;
  };

  if (method == MsMethod::enumeration) {
    std::optional<std::size_t> best;
    double best_obj = 0.0;
    for (std::size_t i = 0; i < cuts.size(); ++i) {
      const auto& ev = evals[i];
      if (!ev.memory_ok || !ev.margin_ok) continue;
      const double obj = ev.numerator / ev.denominator;
      if (!best || obj < best_obj) {  // lexicographic order is the iteration order
        best = i;
        best_obj = obj;
      }
    }
    pick(*best);
    return sol;
  }

  // Dinkelbach: iterate lambda <- N(x)/D(x) with the inner parametric argmin
  // solved by the same enumeration; exact on a finite feasible set.
  double lambda = 0.0;
  for (int iter = 0;; ++iter) {
    std::optional<std::size_t> best;
    double best_val = 0.0;
    for (std::size_t i = 0; i < cuts.size(); ++i) {
      const auto& ev = evals[i];
      if (!ev.memory_ok || !ev.margin_ok) continue;
      const double val = ev.numerator - lambda * ev.denominator;
      if (!best || val < best_val) {
        best = i;
        best_val = val;
      }
    }
    const auto& ev = evals[*best];
    const double scale = std::max(1.0, std::abs(ev.numerator));
    if (std::abs(best_val) <= opts.dinkelbach_tol * scale) {
      pick(*best);
      sol.dinkelbach_iterations = iter;
      return sol;
    }
    if (iter >= opts.dinkelbach_max_iter)
      throw SolverError("Dinkelbach iteration did not converge");
    lambda = ev.numerator / ev.denominator;
  }
}

}  // namespace hsfl
