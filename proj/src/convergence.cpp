#include "hsfl/convergence.hpp"

#include <cmath>
#include <string>

#include "hsfl/errors.hpp"

namespace hsfl {

void ConvergenceParams::validate() const {
  if (!(beta > 0.0)) throw InvalidArgumentError("beta must be positive");
  if (!(gamma > 0.0) || gamma > 1.0 / beta)
    throw InvalidArgumentError("learning rate must satisfy 0 < gamma <= 1/beta");
  if (!(epsilon > 0.0)) throw InvalidArgumentError("epsilon must be positive");
  if (!(vartheta > 0.0)) throw InvalidArgumentError("vartheta must be positive");
  if (num_clients < 1) throw InvalidArgumentError("num_clients must be >= 1");
}

namespace {

double variance_tail(const ConvergenceParams& p, const ModelProfile& profile) {
  double sum = 0.0;
  for (const auto& l : profile.layers()) sum += l.grad_variance;
  return p.beta * p.gamma * sum / static_cast<double>(p.num_clients);
}

std::vector<double> drift_terms(const ConvergenceParams& p, const ModelProfile& profile,
                                const CutVector& cut, const AggSchedule& sched) {
  const double coeff = 4.0 * p.beta * p.beta * p.gamma * p.gamma;
  std::vector<double> terms;
  for (int m = 0; m < cut.num_tiers() - 1; ++m) {
    const int interval = sched.interval(m);
    if (interval <= 1) {
      terms.push_back(0.0);
      continue;
    }
    const double mass = profile.cumulative_second_moment(cut.end(m)) -
                        profile.cumulative_second_moment(cut.begin(m));
    terms.push_back(coeff * static_cast<double>(interval) * static_cast<double>(interval) * mass);
  }
  return terms;
}

void check_shapes(const CutVector& cut, const AggSchedule& sched, const ModelProfile& profile) {
  if (cut.num_layers() != profile.num_layers())
    throw InvalidArgumentError("cut vector layer count does not match profile");
  if (sched.size() != cut.num_tiers() - 1)
    throw InvalidArgumentError("schedule must cover the bottom M-1 tiers");
}

}  // namespace

BoundTails bound_rhs(const ConvergenceParams& params, const ModelProfile& profile,
                     const CutVector& cut, const AggSchedule& sched) {
  params.validate();
  check_shapes(cut, sched, profile);
  BoundTails tails;
  tails.variance = variance_tail(params, profile);
  for (double t : drift_terms(params, profile, cut, sched)) tails.drift += t;
  return tails;
}

double gap_term(const ConvergenceParams& params, long long rounds) {
  params.validate();
  if (rounds < 1) throw InvalidArgumentError("round count must be >= 1");
  return 2.0 * params.vartheta / (params.gamma * static_cast<double>(rounds));
}

long long rounds_for_accuracy(const ConvergenceParams& params, const ModelProfile& profile,
                              const CutVector& cut, const AggSchedule& sched) {
  params.validate();
  check_shapes(cut, sched, profile);
  const double vt = variance_tail(params, profile);
  const auto drifts = drift_terms(params, profile, cut, sched);
  double denom = params.epsilon - vt;
  for (double d : drifts) denom -= d;
  if (!(denom > 0.0)) {
    std::string msg = "accuracy target infeasible: epsilon=" + std::to_string(params.epsilon) +
                      " variance_tail=" + std::to_string(vt);
    for (std::size_t m = 0; m < drifts.size(); ++m)
      msg += " drift_tier" + std::to_string(m + 1) + "=" + std::to_string(drifts[m]);
    throw InfeasibleError(msg, denom);
  }
  const double r = 2.0 * params.vartheta / (params.gamma * denom);
  return static_cast<long long>(std::ceil(r));
}

double theta(const ConvergenceParams& params, const ModelProfile& profile, const Topology& topo,
             const CutVector& cut, const AggSchedule& sched, int batch) {
  const auto consts = build_objective_constants(params, profile, topo, cut, batch);
  return theta_prime(consts, sched);
}

ObjectiveConstants build_objective_constants(const ConvergenceParams& params,
                                             const ModelProfile& profile, const Topology& topo,
                                             const CutVector& cut, int batch) {
  params.validate();
  ObjectiveConstants consts;
  consts.per_round_latency = split_round_latency(profile, topo, cut, batch);
  for (int m = 0; m < topo.num_tiers() - 1; ++m) {
    consts.per_agg_latency.push_back(aggregation_latency(profile, topo, cut, m));
    consts.tier_second_moment.push_back(profile.cumulative_second_moment(cut.end(m)) -
                                        profile.cumulative_second_moment(cut.begin(m)));
  }
  consts.margin = params.epsilon - variance_tail(params, profile);
  consts.beta = params.beta;
  consts.gamma = params.gamma;
  consts.vartheta = params.vartheta;
  return consts;
}

double feasibility_margin(const ObjectiveConstants& consts, const AggSchedule& sched) {
  if (sched.size() != static_cast<int>(consts.per_agg_latency.size()))
    throw InvalidArgumentError("schedule size does not match objective constants");
  const double coeff = 4.0 * consts.beta * consts.beta * consts.gamma * consts.gamma;
  double denom = consts.margin;
  for (int m = 0; m < sched.size(); ++m) {
    const int interval = sched.interval(m);
    if (interval > 1)
      denom -= coeff * static_cast<double>(interval) * static_cast<double>(interval) *
               consts.tier_second_moment[static_cast<std::size_t>(m)];
  }
  return denom;
}

double theta_prime(const ObjectiveConstants& consts, const AggSchedule& sched) {
  const double denom = feasibility_margin(consts, sched);
  if (!(denom > 0.0))
    throw InfeasibleError("schedule drives the accuracy margin non-positive", denom);
  double amortized = consts.per_round_latency;
  for (int m = 0; m < sched.size(); ++m)
    amortized += consts.per_agg_latency[static_cast<std::size_t>(m)] /
                 static_cast<double>(sched.interval(m));
  return 2.0 * consts.vartheta * amortized / (consts.gamma * denom);
}

}  // namespace hsfl
