#pragma once

#include <vector>

#include "hsfl/model_profile.hpp"
#include "hsfl/plan.hpp"
#include "hsfl/topology.hpp"

namespace hsfl {

// Per-round and per-aggregation latency model. Profiles store bytes while
// link rates are bits/second: the x8 conversion happens here and only here.
// All results are seconds.

enum class TransferDirection { up, down };

// Compute time of client `client`'s tier-`tier` sub-model for one minibatch.
double fp_latency(const ModelProfile& profile, const Topology& topo, const CutVector& cut,
                  int batch, int tier, int client);
double bp_latency(const ModelProfile& profile, const Topology& topo, const CutVector& cut,
                  int batch, int tier, int client);

// Smashed-data transfers across the cut at the top of `tier` (tier < M-1).
double activation_upload_latency(const ModelProfile& profile, const Topology& topo,
                                 const CutVector& cut, int batch, int tier, int client);
double grad_download_latency(const ModelProfile& profile, const Topology& topo,
                             const CutVector& cut, int batch, int tier, int client);

// Sub-model exchange with the fed server; zero when the tier has one entity.
double model_transfer_latency(const ModelProfile& profile, const Topology& topo,
                              const CutVector& cut, int tier, int entity,
                              TransferDirection direction);

// Slowest client pipeline: forward, activation uploads, backward, gradient
// downloads summed across tiers.
double split_round_latency(const ModelProfile& profile, const Topology& topo,
                           const CutVector& cut, int batch);

// max-upload plus max-download across the tier's entities.
double aggregation_latency(const ModelProfile& profile, const Topology& topo,
                           const CutVector& cut, int tier);

// R rounds of split training plus floor(R/I_m) aggregations per tier.
double total_latency(const ModelProfile& profile, const Topology& topo, const CutVector& cut,
                     const AggSchedule& sched, int batch, long long rounds);

struct LatencyBreakdown {
  // [tier][client]
  std::vector<std::vector<double>> fp, act_up, bp, grad_down;
  // [tier][entity], bottom M-1 tiers
  std::vector<std::vector<double>> model_up, model_down;
  double split_round = 0.0;
  std::vector<double> aggregation;  // per bottom tier
  double total = 0.0;
  long long rounds = 0;
};

LatencyBreakdown latency_breakdown(const ModelProfile& profile, const Topology& topo,
                                   const CutVector& cut, const AggSchedule& sched, int batch,
                                   long long rounds);

}  // namespace hsfl
