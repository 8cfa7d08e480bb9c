#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hsfl/plan.hpp"
#include "hsfl/topology.hpp"

namespace hsfl {

// Desk-scale dense network split across tiers. Everything runs in double
// precision; the equivalence tests rely on it.

enum class Activation { tanh_act, relu, identity };

struct MlpArch {
  std::vector<int> dims;  // dims[0] = input features, dims.back() = classes
  Activation activation = Activation::tanh_act;

  int num_layers() const { return static_cast<int>(dims.size()) - 1; }
  int num_params() const;
};

struct LayerParams {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
};
using ModelParams = std::vector<LayerParams>;

ModelParams init_params(const MlpArch& arch, std::uint64_t seed);
Eigen::VectorXd flatten(const ModelParams& params);

struct ClientData {
  Eigen::MatrixXd X;  // samples x features
  Eigen::VectorXi y;  // labels in [0, classes)
};

// Isotropic Gaussian blobs, one per class, means spread on a seeded random
// direction set.
ClientData gaussian_mixture(int samples, int dim, int classes, double spread,
                            std::uint64_t seed);

std::vector<ClientData> partition_iid(const ClientData& data, int num_clients,
                                      std::uint64_t seed);
// Label-sorted shards, shards_per_client each, shard order shuffled by seed.
std::vector<ClientData> partition_shards(const ClientData& data, int num_clients,
                                         int shards_per_client, std::uint64_t seed);

struct ForwardResult {
  std::vector<Eigen::MatrixXd> activations;  // activations[l]: output of layer l; [0] = input
  Eigen::MatrixXd probs;                     // softmax output
  double loss = 0.0;                         // mean cross-entropy
};

struct BackwardResult {
  ModelParams grads;  // mean minibatch gradients per layer
};

// Whole-model passes used by the trainer, the virtual-aggregate evaluation,
// and the parameter estimator.
ForwardResult mlp_forward(const MlpArch& arch, const ModelParams& params,
                          const Eigen::MatrixXd& X, const Eigen::VectorXi& y);
BackwardResult mlp_backward(const MlpArch& arch, const ModelParams& params,
                            const ForwardResult& fwd, const Eigen::VectorXi& y);

// Per-client replicas of the tier blocks. The concatenation of a client's
// tier blocks is always a full parameter vector of the global architecture.
class SplitNet {
public:
  SplitNet(MlpArch arch, CutVector cut, int num_clients, std::uint64_t seed);

  const MlpArch& arch() const { return arch_; }
  const CutVector& cut() const { return cut_; }
  int num_clients() const { return num_clients_; }
  int round() const { return round_; }

  const ModelParams& client_params(int client) const;
  ModelParams& mutable_client_params(int client);

  // Tier-by-tier forward for one client: activations cross the cut
  // boundaries exactly as they would over the network.
  ForwardResult forward(int client, const Eigen::MatrixXd& X, const Eigen::VectorXi& y) const;

  // Backward through the cut boundaries (activation gradients flow down the
  // tiers), then a plain SGD step. Returns the per-layer mean gradients.
  BackwardResult backward_and_step(int client, const ForwardResult& fwd,
                                   const Eigen::VectorXi& y, double lr);

  // Every hosted client's tier block becomes the entity mean.
  void entity_average(const Topology& topo, int tier);
  // Tier blocks replaced by the client-count weighted entity mean, then
  // broadcast to every client.
  void fed_aggregate(const Topology& topo, int tier);

  // Read-only weighted average of the tier blocks across entities.
  ModelParams virtual_aggregate(const Topology& topo) const;

  // Squared distance between the virtual aggregate and the farthest client,
  // restricted to one tier's layers.
  double tier_divergence(const Topology& topo, int tier) const;

  void bump_round() { ++round_; }

private:
  MlpArch arch_;
  CutVector cut_;
  int num_clients_;
  int round_ = 0;
  std::vector<ModelParams> params_;  // [client][layer]
};

// Gradient observations captured during training.
struct GradSnapshot {
  // [client][layer], flattened layer gradients.
  std::vector<std::vector<Eigen::VectorXd>> client_layer_grads;
};
struct GradProbe {
  Eigen::VectorXd point;  // flattened parameters
  Eigen::VectorXd grad;   // flattened full-batch gradient of the global loss
};
struct GradTrace {
  int num_layers = 0;
  std::vector<GradSnapshot> snapshots;
  std::vector<GradProbe> probes;
};

struct TraceRow {
  int round = 0;
  double loss_on_aggregate = 0.0;
  std::vector<double> divergence;     // per bottom tier
  std::vector<int> aggregated_tiers;  // 1-based tier ids, CSV-friendly
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  std::vector<double> max_layer_grad_sq;  // per layer, max over rounds and clients
  GradTrace snapshots;
  double initial_loss = 0.0;
  double best_loss = 0.0;
  ModelParams final_aggregate;
};

struct TrainOptions {
  int rounds = 100;
  int batch = 16;
  double lr = 0.05;
  std::uint64_t seed = 0;
  int snapshot_every = 0;  // 0 = no gradient snapshots
  int threads = 1;
};

// One round: every client samples a minibatch, steps, entities average every
// tier, then due tiers aggregate on the fed server in ascending order. Loss
// is always evaluated on the virtual aggregate.
TrainTrace train(SplitNet& net, const Topology& topo, const std::vector<ClientData>& data,
                 const AggSchedule& sched, const TrainOptions& opts);

// Deterministic minibatch index stream, shared with reference trainers so
// trajectories are comparable sample-for-sample.
std::vector<int> minibatch_indices(std::uint64_t seed, int client, int round, int dataset_size,
                                   int batch);

struct EstimatedStats {
  std::vector<double> grad_second_moment;  // per layer
  std::vector<double> grad_variance;       // per layer
  double beta = 0.0;
};

// Per-layer gradient bounds from recorded snapshots plus a smoothness
// estimate from full-batch probe pairs.
EstimatedStats estimate_params(const GradTrace& trace);

}  // namespace hsfl
