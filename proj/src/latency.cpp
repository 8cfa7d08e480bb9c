#include "hsfl/latency.hpp"

#include <algorithm>
#include <cmath>

#include "hsfl/errors.hpp"

namespace hsfl {

namespace {

constexpr double kBitsPerByte = 8.0;

void check_plan(const ModelProfile& profile, const Topology& topo, const CutVector& cut) {
  if (cut.num_layers() != profile.num_layers())
    throw InvalidArgumentError("cut vector layer count does not match profile");
  if (cut.num_tiers() != topo.num_tiers())
    throw InvalidArgumentError("cut vector tier count does not match topology");
}

void check_tier_client(const Topology& topo, int tier, int client, bool below_top) {
  const int limit = below_top ? topo.num_tiers() - 1 : topo.num_tiers();
  if (tier < 0 || tier >= limit) throw InvalidArgumentError("tier index out of range");
  if (client < 0 || client >= topo.num_clients())
    throw InvalidArgumentError("client index out of range");
}

}  // namespace

double fp_latency(const ModelProfile& profile, const Topology& topo, const CutVector& cut,
                  int batch, int tier, int client) {
  check_plan(profile, topo, cut);
  check_tier_client(topo, tier, client, false);
  const double work = profile.cumulative_fp_flops(cut.end(tier), batch) -
                      profile.cumulative_fp_flops(cut.begin(tier), batch);
  const double rate = topo.compute_flops(tier, client);
  if (!(rate > 0.0)) throw InvalidArgumentError("compute capacity must be positive");
  return work / rate;
}

double bp_latency(const ModelProfile& profile, const Topology& topo, const CutVector& cut,
                  int batch, int tier, int client) {
  check_plan(profile, topo, cut);
  check_tier_client(topo, tier, client, false);
  const double work = profile.cumulative_bp_flops(cut.end(tier), batch) -
                      profile.cumulative_bp_flops(cut.begin(tier), batch);
  const double rate = topo.compute_flops(tier, client);
  if (!(rate > 0.0)) throw InvalidArgumentError("compute capacity must be positive");
  return work / rate;
}

double activation_upload_latency(const ModelProfile& profile, const Topology& topo,
                                 const CutVector& cut, int batch, int tier, int client) {
  check_plan(profile, topo, cut);
  check_tier_client(topo, tier, client, true);
  if (batch < 1) throw InvalidArgumentError("batch size must be >= 1");
  const int boundary = cut.end(tier);  // layer emitting the smashed data
  const double bytes = profile.layer(boundary - 1).activation_bytes;
  const double rate = topo.uplink_activation_bps(tier, client);
  if (!(rate > 0.0)) throw InvalidArgumentError("activation uplink rate must be positive");
  return static_cast<double>(batch) * kBitsPerByte * bytes / rate;
}

double grad_download_latency(const ModelProfile& profile, const Topology& topo,
                             const CutVector& cut, int batch, int tier, int client) {
  check_plan(profile, topo, cut);
  check_tier_client(topo, tier, client, true);
  if (batch < 1) throw InvalidArgumentError("batch size must be >= 1");
  const int boundary = cut.end(tier);
  const double bytes = profile.layer(boundary - 1).act_grad_bytes;
  const double rate = topo.downlink_grad_bps(tier, client);
  if (!(rate > 0.0)) throw InvalidArgumentError("gradient downlink rate must be positive");
  return static_cast<double>(batch) * kBitsPerByte * bytes / rate;
}

double model_transfer_latency(const ModelProfile& profile, const Topology& topo,
                              const CutVector& cut, int tier, int entity,
                              TransferDirection direction) {
  check_plan(profile, topo, cut);
  if (tier < 0 || tier >= topo.num_tiers() - 1)
    throw InvalidArgumentError("model transfers are defined below the top tier");
  if (topo.entities_in_tier(tier) == 1) return 0.0;  // nothing to synchronize
  const double bytes = profile.cumulative_bytes(cut.end(tier), ByteKind::param) -
                       profile.cumulative_bytes(cut.begin(tier), ByteKind::param);
  const double rate = direction == TransferDirection::up ? topo.fed_uplink_bps(tier, entity)
                                                         : topo.fed_downlink_bps(tier, entity);
  if (!(rate > 0.0)) throw InvalidArgumentError("fed-server link rate must be positive");
  return kBitsPerByte * bytes / rate;
}

double split_round_latency(const ModelProfile& profile, const Topology& topo,
                           const CutVector& cut, int batch) {
  check_plan(profile, topo, cut);
  const int M = topo.num_tiers();
  double worst = 0.0;
  for (int n = 0; n < topo.num_clients(); ++n) {
    double pipeline = 0.0;
    for (int m = 0; m < M; ++m) {
      pipeline += fp_latency(profile, topo, cut, batch, m, n);
      pipeline += bp_latency(profile, topo, cut, batch, m, n);
    }
    for (int m = 0; m < M - 1; ++m) {
      pipeline += activation_upload_latency(profile, topo, cut, batch, m, n);
      pipeline += grad_download_latency(profile, topo, cut, batch, m, n);
    }
    worst = std::max(worst, pipeline);
  }
  return worst;
}

double aggregation_latency(const ModelProfile& profile, const Topology& topo,
                           const CutVector& cut, int tier) {
  check_plan(profile, topo, cut);
  if (tier < 0 || tier >= topo.num_tiers() - 1)
    throw InvalidArgumentError("aggregation latency is defined below the top tier");
  double up = 0.0, down = 0.0;
  for (int j = 0; j < topo.entities_in_tier(tier); ++j) {
    up = std::max(up, model_transfer_latency(profile, topo, cut, tier, j, TransferDirection::up));
    down = std::max(down,
                    model_transfer_latency(profile, topo, cut, tier, j, TransferDirection::down));
  }
  return up + down;
}

double total_latency(const ModelProfile& profile, const Topology& topo, const CutVector& cut,
                     const AggSchedule& sched, int batch, long long rounds) {
  check_plan(profile, topo, cut);
  if (sched.size() != topo.num_tiers() - 1)
    throw InvalidArgumentError("schedule must cover the bottom M-1 tiers");
  if (rounds < 1) throw InvalidArgumentError("round count must be >= 1");
  double total = static_cast<double>(rounds) * split_round_latency(profile, topo, cut, batch);
  for (int m = 0; m < topo.num_tiers() - 1; ++m) {
    const auto events = static_cast<double>(rounds / sched.interval(m));
    total += events * aggregation_latency(profile, topo, cut, m);
  }
  return total;
}

LatencyBreakdown latency_breakdown(const ModelProfile& profile, const Topology& topo,
                                   const CutVector& cut, const AggSchedule& sched, int batch,
                                   long long rounds) {
  check_plan(profile, topo, cut);
  const int M = topo.num_tiers();
  const int N = topo.num_clients();
  LatencyBreakdown out;
  out.rounds = rounds;
  out.fp.resize(static_cast<std::size_t>(M));
  out.bp.resize(static_cast<std::size_t>(M));
  out.act_up.resize(static_cast<std::size_t>(M - 1));
  out.grad_down.resize(static_cast<std::size_t>(M - 1));
  for (int m = 0; m < M; ++m) {
    for (int n = 0; n < N; ++n) {
      out.fp[static_cast<std::size_t>(m)].push_back(fp_latency(profile, topo, cut, batch, m, n));
      out.bp[static_cast<std::size_t>(m)].push_back(bp_latency(profile, topo, cut, batch, m, n));
    }
  }
  for (int m = 0; m < M - 1; ++m) {
    for (int n = 0; n < N; ++n) {
      out.act_up[static_cast<std::size_t>(m)].push_back(
          activation_upload_latency(profile, topo, cut, batch, m, n));
      out.grad_down[static_cast<std::size_t>(m)].push_back(
          grad_download_latency(profile, topo, cut, batch, m, n));
    }
    std::vector<double> ups, downs;
    for (int j = 0; j < topo.entities_in_tier(m); ++j) {
      ups.push_back(model_transfer_latency(profile, topo, cut, m, j, TransferDirection::up));
      downs.push_back(model_transfer_latency(profile, topo, cut, m, j, TransferDirection::down));
    }
    out.model_up.push_back(std::move(ups));
    out.model_down.push_back(std::move(downs));
    out.aggregation.push_back(aggregation_latency(profile, topo, cut, m));
  }
  out.split_round = split_round_latency(profile, topo, cut, batch);
  out.total = total_latency(profile, topo, cut, sched, batch, rounds);
  return out;
}

}  // namespace hsfl
