#pragma once

#include <string>
#include <vector>

namespace hsfl {

// Per-layer cost/statistics record. All sizes are bytes; FLOPs are per sample.
// Link rates live in the topology and are bits per second; the latency module
// owns the single bytes-to-bits conversion.
struct LayerProfile {
  double fp_flops = 0.0;             // forward FLOPs for one sample
  double bp_flops = 0.0;             // backward FLOPs for one sample
  double activation_bytes = 0.0;     // output activation, one sample
  double act_grad_bytes = 0.0;       // activation gradient, one sample
  double param_bytes = 0.0;          // layer parameters
  double optimizer_state_bytes = 0.0;
  double grad_variance = 0.0;        // per-layer stochastic-gradient variance bound
  double grad_second_moment = 0.0;   // per-layer squared-gradient bound
};

enum class ByteKind { activation, act_grad, param, optimizer_state };

// Immutable per-layer profile of a network. Prefix sums are precomputed once;
// all accessors take a prefix length in [0, L].
class ModelProfile {
public:
  ModelProfile(std::string name, std::vector<LayerProfile> layers);

  const std::string& name() const { return name_; }
  int num_layers() const { return static_cast<int>(layers_.size()); }
  const LayerProfile& layer(int index) const;
  const std::vector<LayerProfile>& layers() const { return layers_; }

  // Forward FLOPs of the first `prefix` layers for a `batch`-sample minibatch.
  double cumulative_fp_flops(int prefix, int batch) const;
  double cumulative_bp_flops(int prefix, int batch) const;
  double cumulative_bytes(int prefix, ByteKind kind) const;
  double cumulative_second_moment(int prefix) const;

  std::string serialize() const;
  static ModelProfile parse(const std::string& text);
  static ModelProfile load(const std::string& path);
  void save(const std::string& path) const;

  bool operator==(const ModelProfile& other) const;

private:
  std::string name_;
  std::vector<LayerProfile> layers_;
  // Per-sample prefix sums, index 0..L.
  std::vector<double> fp_prefix_, bp_prefix_;
  std::vector<double> act_prefix_, act_grad_prefix_, param_prefix_, opt_prefix_;
  std::vector<double> second_moment_prefix_;
};

// Profiles shipped with the library: "vgg16" (CIFAR-scale) and "tinymlp"
// (the desk-scale trainer's default architecture).
ModelProfile builtin_profile(const std::string& name);

// Replaces the per-layer gradient statistics of `profile` with estimated ones.
ModelProfile with_gradient_stats(const ModelProfile& profile,
                                 const std::vector<double>& grad_variance,
                                 const std::vector<double>& grad_second_moment);

}  // namespace hsfl
