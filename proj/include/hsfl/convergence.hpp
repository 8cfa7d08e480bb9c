#pragma once

#include <vector>

#include "hsfl/latency.hpp"
#include "hsfl/model_profile.hpp"
#include "hsfl/plan.hpp"
#include "hsfl/topology.hpp"

namespace hsfl {

struct ConvergenceParams {
  double beta = 0.0;      // smoothness constant
  double gamma = 0.0;     // learning rate, 0 < gamma <= 1/beta
  double epsilon = 0.0;   // target mean squared gradient norm
  double vartheta = 0.0;  // initial optimality gap
  int num_clients = 0;

  void validate() const;
};

// The two schedule-dependent tails of the convergence bound. The remaining
// 2*vartheta/(gamma*R) term depends on the round count and is exposed via
// gap_term().
struct BoundTails {
  double variance = 0.0;  // beta*gamma*sum(sigma_l^2)/N
  double drift = 0.0;     // 4*beta^2*gamma^2 * sum_m [I_m>1] I_m^2 * tier second moment
};

BoundTails bound_rhs(const ConvergenceParams& params, const ModelProfile& profile,
                     const CutVector& cut, const AggSchedule& sched);

double gap_term(const ConvergenceParams& params, long long rounds);

// Smallest round count whose bound meets epsilon. Throws InfeasibleError when
// the tails already exceed epsilon, naming the per-tier drift contributions.
long long rounds_for_accuracy(const ConvergenceParams& params, const ModelProfile& profile,
                              const CutVector& cut, const AggSchedule& sched);

// Bound-weighted training-time objective: amortized per-round latency divided
// by the accuracy margin left after the tails.
double theta(const ConvergenceParams& params, const ModelProfile& profile, const Topology& topo,
             const CutVector& cut, const AggSchedule& sched, int batch);

// Constants of the objective once the cut is fixed: per-round latency, the
// per-tier aggregation cost, the accuracy margin, and the per-tier
// second-moment mass that scales the drift penalty.
struct ObjectiveConstants {
  double per_round_latency = 0.0;         // T_S at the fixed cut
  std::vector<double> per_agg_latency;    // per bottom tier, up+down
  double margin = 0.0;                    // epsilon minus the variance tail
  std::vector<double> tier_second_moment; // per bottom tier
  double beta = 0.0, gamma = 0.0, vartheta = 0.0;
};

ObjectiveConstants build_objective_constants(const ConvergenceParams& params,
                                             const ModelProfile& profile, const Topology& topo,
                                             const CutVector& cut, int batch);

// Same objective evaluated from the precomputed constants.
double theta_prime(const ObjectiveConstants& consts, const AggSchedule& sched);

// Denominator margin of the objective; positive iff the schedule is feasible.
double feasibility_margin(const ObjectiveConstants& consts, const AggSchedule& sched);

}  // namespace hsfl
