#include "hsfl/split_train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hsfl/errors.hpp"
#include "hsfl/parallel.hpp"
#include "hsfl/rng.hpp"

namespace hsfl {

namespace {

Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::tanh_act: return z.array().tanh();
    case Activation::relu: return z.array().max(0.0);
    case Activation::identity: return z;
  }
  throw InvalidArgumentError("unknown activation");
}

// Derivative expressed through the activation output.
Eigen::ArrayXXd activation_grad(const Eigen::MatrixXd& a, Activation act) {
  switch (act) {
    case Activation::tanh_act: return 1.0 - a.array().square();
    case Activation::relu: return (a.array() > 0.0).cast<double>();
    case Activation::identity: return Eigen::ArrayXXd::Ones(a.rows(), a.cols());
  }
  throw InvalidArgumentError("unknown activation");
}

void check_client_data(const MlpArch& arch, const Eigen::MatrixXd& X, const Eigen::VectorXi& y) {
  if (X.cols() != arch.dims.front())
    throw InvalidArgumentError("feature dimension does not match the architecture");
  if (X.rows() != y.size()) throw InvalidArgumentError("feature/label row counts differ");
  const int classes = arch.dims.back();
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] < 0 || y[i] >= classes) throw InvalidArgumentError("label out of range");
}

double layer_sq_norm(const LayerParams& p) {
  return p.W.squaredNorm() + p.b.squaredNorm();
}

Eigen::VectorXd flatten_layer(const LayerParams& p) {
  Eigen::VectorXd v(p.W.size() + p.b.size());
  v.head(p.W.size()) = Eigen::Map<const Eigen::VectorXd>(p.W.data(), p.W.size());
  v.tail(p.b.size()) = p.b;
  return v;
}

}  // namespace

int MlpArch::num_params() const {
  int total = 0;
  for (int l = 0; l < num_layers(); ++l)
    total += dims[static_cast<std::size_t>(l)] * dims[static_cast<std::size_t>(l) + 1] +
             dims[static_cast<std::size_t>(l) + 1];
  return total;
}

ModelParams init_params(const MlpArch& arch, std::uint64_t seed) {
  if (arch.num_layers() < 1) throw InvalidArgumentError("architecture needs at least one layer");
  ModelParams params;
  for (int l = 0; l < arch.num_layers(); ++l) {
    const int in = arch.dims[static_cast<std::size_t>(l)];
    const int out = arch.dims[static_cast<std::size_t>(l) + 1];
    Rng rng(Rng::derive_seed(seed, static_cast<std::uint64_t>(l)));
    LayerParams p{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) p.W(i, j) = scale * rng.normal();
    params.push_back(std::move(p));
  }
  return params;
}

Eigen::VectorXd flatten(const ModelParams& params) {
  Eigen::Index total = 0;
  for (const auto& p : params) total += p.W.size() + p.b.size();
  Eigen::VectorXd v(total);
  Eigen::Index at = 0;
  for (const auto& p : params) {
    v.segment(at, p.W.size()) = Eigen::Map<const Eigen::VectorXd>(p.W.data(), p.W.size());
    at += p.W.size();
    v.segment(at, p.b.size()) = p.b;
    at += p.b.size();
  }
  return v;
}

ClientData gaussian_mixture(int samples, int dim, int classes, double spread,
                            std::uint64_t seed) {
  if (samples < classes || dim < 1 || classes < 2)
    throw InvalidArgumentError("gaussian_mixture: bad shape");
  Rng rng(seed);
  Eigen::MatrixXd means(classes, dim);
  for (int c = 0; c < classes; ++c) {
    Eigen::VectorXd v(dim);
    for (int j = 0; j < dim; ++j) v[j] = rng.normal();
    means.row(c) = spread * v.normalized().transpose();
  }
  ClientData data;
  data.X.resize(samples, dim);
  data.y.resize(samples);
  for (int i = 0; i < samples; ++i) {
    const int c = i % classes;
    data.y[i] = c;
    for (int j = 0; j < dim; ++j) data.X(i, j) = means(c, j) + rng.normal();
  }
  // Shuffle rows so class labels are not interleaved by construction.
  std::vector<int> order(static_cast<std::size_t>(samples));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  ClientData shuffled;
  shuffled.X.resize(samples, dim);
  shuffled.y.resize(samples);
  for (int i = 0; i < samples; ++i) {
    shuffled.X.row(i) = data.X.row(order[static_cast<std::size_t>(i)]);
    shuffled.y[i] = data.y[order[static_cast<std::size_t>(i)]];
  }
  return shuffled;
}

namespace {

std::vector<ClientData> gather(const ClientData& data, const std::vector<std::vector<int>>& idx) {
  std::vector<ClientData> out;
  for (const auto& rows : idx) {
    ClientData c;
    c.X.resize(static_cast<Eigen::Index>(rows.size()), data.X.cols());
    c.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      c.X.row(static_cast<Eigen::Index>(i)) = data.X.row(rows[i]);
      c.y[static_cast<Eigen::Index>(i)] = data.y[rows[i]];
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

std::vector<ClientData> partition_iid(const ClientData& data, int num_clients,
                                      std::uint64_t seed) {
  const int total = static_cast<int>(data.y.size());
  if (num_clients < 1 || total % num_clients != 0)
    throw InvalidArgumentError("IID partition needs equal-size splits");
  std::vector<int> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const int per = total / num_clients;
  std::vector<std::vector<int>> idx(static_cast<std::size_t>(num_clients));
  for (int n = 0; n < num_clients; ++n)
    idx[static_cast<std::size_t>(n)] =
        std::vector<int>(order.begin() + n * per, order.begin() + (n + 1) * per);
  return gather(data, idx);
}

std::vector<ClientData> partition_shards(const ClientData& data, int num_clients,
                                         int shards_per_client, std::uint64_t seed) {
  const int total = static_cast<int>(data.y.size());
  const int shards = num_clients * shards_per_client;
  if (shards < 1 || total % shards != 0)
    throw InvalidArgumentError("shard partition needs equal-size shards");
  std::vector<int> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return data.y[a] < data.y[b]; });
  std::vector<int> shard_order(static_cast<std::size_t>(shards));
  std::iota(shard_order.begin(), shard_order.end(), 0);
  Rng rng(seed);
  rng.shuffle(shard_order);
  const int per_shard = total / shards;
  std::vector<std::vector<int>> idx(static_cast<std::size_t>(num_clients));
  for (int n = 0; n < num_clients; ++n) {
    for (int s = 0; s < shards_per_client; ++s) {
      const int shard = shard_order[static_cast<std::size_t>(n * shards_per_client + s)];
      for (int k = 0; k < per_shard; ++k)
        idx[static_cast<std::size_t>(n)].push_back(order[static_cast<std::size_t>(shard * per_shard + k)]);
    }
  }
  return gather(data, idx);
}

ForwardResult mlp_forward(const MlpArch& arch, const ModelParams& params,
                          const Eigen::MatrixXd& X, const Eigen::VectorXi& y) {
  check_client_data(arch, X, y);
  if (static_cast<int>(params.size()) != arch.num_layers())
    throw InvalidArgumentError("parameter stack does not match the architecture");
  const int L = arch.num_layers();
  ForwardResult out;
  out.activations.resize(static_cast<std::size_t>(L) + 1);
  out.activations[0] = X;
  for (int l = 0; l < L; ++l) {
    const auto& p = params[static_cast<std::size_t>(l)];
    Eigen::MatrixXd z = out.activations[static_cast<std::size_t>(l)] * p.W.transpose();
    z.rowwise() += p.b.transpose();
    out.activations[static_cast<std::size_t>(l) + 1] =
        l + 1 < L ? apply_activation(z, arch.activation) : z;
  }
  const Eigen::MatrixXd& logits = out.activations.back();
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  Eigen::MatrixXd shifted = logits.colwise() - row_max;
  Eigen::MatrixXd expd = shifted.array().exp();
  const Eigen::VectorXd norm = expd.rowwise().sum();
  out.probs = expd.array().colwise() / norm.array();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    loss -= shifted(i, y[i]) - std::log(norm[i]);
  out.loss = loss / static_cast<double>(y.size());
  return out;
}

BackwardResult mlp_backward(const MlpArch& arch, const ModelParams& params,
                            const ForwardResult& fwd, const Eigen::VectorXi& y) {
  const int L = arch.num_layers();
  const auto batch = static_cast<double>(y.size());
  BackwardResult out;
  out.grads.resize(static_cast<std::size_t>(L));
  Eigen::MatrixXd dz = fwd.probs;
  for (Eigen::Index i = 0; i < y.size(); ++i) dz(i, y[i]) -= 1.0;
  dz /= batch;
  for (int l = L - 1; l >= 0; --l) {
    const auto& p = params[static_cast<std::size_t>(l)];
    const Eigen::MatrixXd& input = fwd.activations[static_cast<std::size_t>(l)];
    out.grads[static_cast<std::size_t>(l)].W = dz.transpose() * input;
    out.grads[static_cast<std::size_t>(l)].b = dz.colwise().sum();
    if (l > 0) {
      const Eigen::MatrixXd da = dz * p.W;  // activation gradient crossing down
      dz = da.array() *
           activation_grad(fwd.activations[static_cast<std::size_t>(l)], arch.activation);
    }
  }
  return out;
}

SplitNet::SplitNet(MlpArch arch, CutVector cut, int num_clients, std::uint64_t seed)
    : arch_(std::move(arch)), cut_(std::move(cut)), num_clients_(num_clients) {
  if (cut_.num_layers() != arch_.num_layers())
    throw InvalidArgumentError("cut vector does not match the architecture depth");
  if (num_clients_ < 1) throw InvalidArgumentError("need at least one client");
  const ModelParams shared = init_params(arch_, seed);
  params_.assign(static_cast<std::size_t>(num_clients_), shared);
}

const ModelParams& SplitNet::client_params(int client) const {
  if (client < 0 || client >= num_clients_) throw InvalidArgumentError("client out of range");
  return params_[static_cast<std::size_t>(client)];
}

ModelParams& SplitNet::mutable_client_params(int client) {
  if (client < 0 || client >= num_clients_) throw InvalidArgumentError("client out of range");
  return params_[static_cast<std::size_t>(client)];
}

ForwardResult SplitNet::forward(int client, const Eigen::MatrixXd& X,
                                const Eigen::VectorXi& y) const {
  const ModelParams& params = client_params(client);
  check_client_data(arch_, X, y);
  const int M = cut_.num_tiers();
  const int L = arch_.num_layers();
  ForwardResult out;
  out.activations.resize(static_cast<std::size_t>(L) + 1);
  out.activations[0] = X;
  // Tier by tier; the activation leaving tier m is the smashed data that
  // crosses to tier m+1.
  Eigen::MatrixXd carried = X;
  for (int m = 0; m < M; ++m) {
    for (int l = cut_.begin(m); l < cut_.end(m); ++l) {
      const auto& p = params[static_cast<std::size_t>(l)];
      Eigen::MatrixXd z = carried * p.W.transpose();
      z.rowwise() += p.b.transpose();
      carried = l + 1 < L ? apply_activation(z, arch_.activation) : z;
      out.activations[static_cast<std::size_t>(l) + 1] = carried;
    }
  }
  const Eigen::MatrixXd& logits = out.activations.back();
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  Eigen::MatrixXd shifted = logits.colwise() - row_max;
  Eigen::MatrixXd expd = shifted.array().exp();
  const Eigen::VectorXd norm = expd.rowwise().sum();
  out.probs = expd.array().colwise() / norm.array();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    loss -= shifted(i, y[i]) - std::log(norm[i]);
  out.loss = loss / static_cast<double>(y.size());
  return out;
}

BackwardResult SplitNet::backward_and_step(int client, const ForwardResult& fwd,
                                           const Eigen::VectorXi& y, double lr) {
  ModelParams& params = mutable_client_params(client);
  const int M = cut_.num_tiers();
  const auto batch = static_cast<double>(y.size());
  BackwardResult out;
  out.grads.resize(static_cast<std::size_t>(arch_.num_layers()));
  Eigen::MatrixXd dz = fwd.probs;
  for (Eigen::Index i = 0; i < y.size(); ++i) dz(i, y[i]) -= 1.0;
  dz /= batch;
  // Descend the tiers; the gradient leaving tier m is the smashed-data
  // gradient handed to tier m-1.
  for (int m = M - 1; m >= 0; --m) {
    for (int l = cut_.end(m) - 1; l >= cut_.begin(m); --l) {
      auto& p = params[static_cast<std::size_t>(l)];
      const Eigen::MatrixXd& input = fwd.activations[static_cast<std::size_t>(l)];
      LayerParams grad{dz.transpose() * input, dz.colwise().sum()};
      if (l > 0) {
        const Eigen::MatrixXd da = dz * p.W;
        dz = da.array() *
             activation_grad(fwd.activations[static_cast<std::size_t>(l)], arch_.activation);
      }
      p.W.noalias() -= lr * grad.W;
      p.b.noalias() -= lr * grad.b;
      out.grads[static_cast<std::size_t>(l)] = std::move(grad);
    }
  }
  return out;
}

void SplitNet::entity_average(const Topology& topo, int tier) {
  if (topo.num_clients() != num_clients_)
    throw InvalidArgumentError("topology client count does not match the split net");
  for (int j = 0; j < topo.entities_in_tier(tier); ++j) {
    const auto& hosted = topo.clients_of(tier, j);
    if (hosted.size() <= 1) continue;
    for (int l = cut_.begin(tier); l < cut_.end(tier); ++l) {
      Eigen::MatrixXd w_sum = params_[static_cast<std::size_t>(hosted[0])][static_cast<std::size_t>(l)].W;
      Eigen::VectorXd b_sum = params_[static_cast<std::size_t>(hosted[0])][static_cast<std::size_t>(l)].b;
      for (std::size_t k = 1; k < hosted.size(); ++k) {
        w_sum += params_[static_cast<std::size_t>(hosted[k])][static_cast<std::size_t>(l)].W;
        b_sum += params_[static_cast<std::size_t>(hosted[k])][static_cast<std::size_t>(l)].b;
      }
      const double inv = 1.0 / static_cast<double>(hosted.size());
      w_sum *= inv;
      b_sum *= inv;
      for (int c : hosted) {
        params_[static_cast<std::size_t>(c)][static_cast<std::size_t>(l)].W = w_sum;
        params_[static_cast<std::size_t>(c)][static_cast<std::size_t>(l)].b = b_sum;
      }
    }
  }
}

void SplitNet::fed_aggregate(const Topology& topo, int tier) {
  if (topo.num_clients() != num_clients_)
    throw InvalidArgumentError("topology client count does not match the split net");
  const double inv_n = 1.0 / static_cast<double>(num_clients_);
  for (int l = cut_.begin(tier); l < cut_.end(tier); ++l) {
    Eigen::MatrixXd w_agg;
    Eigen::VectorXd b_agg;
    for (int j = 0; j < topo.entities_in_tier(tier); ++j) {
      const auto& hosted = topo.clients_of(tier, j);
      Eigen::MatrixXd w_ent = params_[static_cast<std::size_t>(hosted[0])][static_cast<std::size_t>(l)].W;
      Eigen::VectorXd b_ent = params_[static_cast<std::size_t>(hosted[0])][static_cast<std::size_t>(l)].b;
      for (std::size_t k = 1; k < hosted.size(); ++k) {
        w_ent += params_[static_cast<std::size_t>(hosted[k])][static_cast<std::size_t>(l)].W;
        b_ent += params_[static_cast<std::size_t>(hosted[k])][static_cast<std::size_t>(l)].b;
      }
      // Entity mean weighted by its client share collapses to sum/N.
      const double weight = inv_n;
      if (j == 0) {
        w_agg = weight * w_ent;
        b_agg = weight * b_ent;
      } else {
        w_agg += weight * w_ent;
        b_agg += weight * b_ent;
      }
    }
    for (int c = 0; c < num_clients_; ++c) {
      params_[static_cast<std::size_t>(c)][static_cast<std::size_t>(l)].W = w_agg;
      params_[static_cast<std::size_t>(c)][static_cast<std::size_t>(l)].b = b_agg;
    }
  }
}

ModelParams SplitNet::virtual_aggregate(const Topology& topo) const {
  ModelParams agg;
  agg.reserve(static_cast<std::size_t>(arch_.num_layers()));
  const double inv_n = 1.0 / static_cast<double>(num_clients_);
  for (int m = 0; m < cut_.num_tiers(); ++m) {
    for (int l = cut_.begin(m); l < cut_.end(m); ++l) {
      Eigen::MatrixXd w_agg;
      Eigen::VectorXd b_agg;
      for (int j = 0; j < topo.entities_in_tier(m); ++j) {
        const auto& hosted = topo.clients_of(m, j);
        Eigen::MatrixXd w_ent = params_[static_cast<std::size_t>(hosted[0])][static_cast<std::size_t>(l)].W;
        Eigen::VectorXd b_ent = params_[static_cast<std::size_t>(hosted[0])][static_cast<std::size_t>(l)].b;
        for (std::size_t k = 1; k < hosted.size(); ++k) {
          w_ent += params_[static_cast<std::size_t>(hosted[k])][static_cast<std::size_t>(l)].W;
          b_ent += params_[static_cast<std::size_t>(hosted[k])][static_cast<std::size_t>(l)].b;
        }
        if (j == 0) {
          w_agg = inv_n * w_ent;
          b_agg = inv_n * b_ent;
        } else {
          w_agg += inv_n * w_ent;
          b_agg += inv_n * b_ent;
        }
      }
      agg.push_back({std::move(w_agg), std::move(b_agg)});
    }
  }
  return agg;
}

double SplitNet::tier_divergence(const Topology& topo, int tier) const {
  const ModelParams agg = virtual_aggregate(topo);
  double worst = 0.0;
  for (int c = 0; c < num_clients_; ++c) {
    double d = 0.0;
    for (int l = cut_.begin(tier); l < cut_.end(tier); ++l) {
      d += (params_[static_cast<std::size_t>(c)][static_cast<std::size_t>(l)].W -
            agg[static_cast<std::size_t>(l)].W)
               .squaredNorm();
      d += (params_[static_cast<std::size_t>(c)][static_cast<std::size_t>(l)].b -
            agg[static_cast<std::size_t>(l)].b)
               .squaredNorm();
    }
    worst = std::max(worst, d);
  }
  return worst;
}

std::vector<int> minibatch_indices(std::uint64_t seed, int client, int round, int dataset_size,
                                   int batch) {
  const std::uint64_t client_seed = Rng::derive_seed(seed, static_cast<std::uint64_t>(client));
  Rng rng(Rng::derive_seed(client_seed, static_cast<std::uint64_t>(round)));
  return rng.sample_without_replacement(dataset_size, std::min(batch, dataset_size));
}

namespace {

double aggregate_loss(const MlpArch& arch, const ModelParams& aggregate,
                      const std::vector<ClientData>& data) {
  double weighted = 0.0;
  long long total = 0;
  for (const auto& d : data) {
    const auto fwd = mlp_forward(arch, aggregate, d.X, d.y);
    weighted += fwd.loss * static_cast<double>(d.y.size());
    total += d.y.size();
  }
  return weighted / static_cast<double>(total);
}

GradProbe full_batch_probe(const MlpArch& arch, const ModelParams& aggregate,
                           const std::vector<ClientData>& data) {
  // Gradient of the global loss: the client average of full-batch gradients.
  ModelParams sum;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto fwd = mlp_forward(arch, aggregate, data[n].X, data[n].y);
    const auto bwd = mlp_backward(arch, aggregate, fwd, data[n].y);
    if (n == 0) {
      sum = bwd.grads;
    } else {
      for (std::size_t l = 0; l < sum.size(); ++l) {
        sum[l].W += bwd.grads[l].W;
        sum[l].b += bwd.grads[l].b;
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(data.size());
  for (auto& p : sum) {
    p.W *= inv;
    p.b *= inv;
  }
  return GradProbe{flatten(aggregate), flatten(sum)};
}

}  // namespace

TrainTrace train(SplitNet& net, const Topology& topo, const std::vector<ClientData>& data,
                 const AggSchedule& sched, const TrainOptions& opts) {
  const int N = net.num_clients();
  const int M = net.cut().num_tiers();
  if (static_cast<int>(data.size()) != N)
    throw InvalidArgumentError("need one dataset per client");
  if (topo.num_clients() != N)
    throw InvalidArgumentError("topology client count does not match the split net");
  if (topo.num_tiers() != M)
    throw InvalidArgumentError("topology tier count does not match the cut vector");
  if (sched.size() != M - 1)
    throw InvalidArgumentError("schedule must cover the bottom M-1 tiers");
  if (opts.rounds < 1 || opts.batch < 1) throw InvalidArgumentError("bad training options");

  const int L = net.arch().num_layers();
  TrainTrace trace;
  trace.snapshots.num_layers = L;
  trace.max_layer_grad_sq.assign(static_cast<std::size_t>(L), 0.0);

  {
    TraceRow row;
    row.round = 0;
    row.loss_on_aggregate = aggregate_loss(net.arch(), net.virtual_aggregate(topo), data);
    row.divergence.assign(static_cast<std::size_t>(M - 1), 0.0);
    trace.rows.push_back(std::move(row));
    trace.initial_loss = trace.rows.front().loss_on_aggregate;
    trace.best_loss = trace.initial_loss;
  }

  std::vector<std::vector<double>> client_max(static_cast<std::size_t>(N),
                                              std::vector<double>(static_cast<std::size_t>(L), 0.0));
  std::vector<std::vector<Eigen::VectorXd>> round_grads(static_cast<std::size_t>(N));

  for (int t = 1; t <= opts.rounds; ++t) {
    const bool snapshot_round = opts.snapshot_every > 0 && t % opts.snapshot_every == 0;

    parallel_for(N, opts.threads, [&](int n) {
      const auto& d = data[static_cast<std::size_t>(n)];
      const auto idx =
          minibatch_indices(opts.seed, n, t, static_cast<int>(d.y.size()), opts.batch);
      Eigen::MatrixXd bx(static_cast<Eigen::Index>(idx.size()), d.X.cols());
      Eigen::VectorXi by(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t i = 0; i < idx.size(); ++i) {
        bx.row(static_cast<Eigen::Index>(i)) = d.X.row(idx[i]);
        by[static_cast<Eigen::Index>(i)] = d.y[idx[i]];
      }
      const auto fwd = net.forward(n, bx, by);
      const auto bwd = net.backward_and_step(n, fwd, by, opts.lr);
      auto& maxes = client_max[static_cast<std::size_t>(n)];
      for (int l = 0; l < L; ++l)
        maxes[static_cast<std::size_t>(l)] =
            std::max(maxes[static_cast<std::size_t>(l)],
                     layer_sq_norm(bwd.grads[static_cast<std::size_t>(l)]));
      if (snapshot_round) {
        auto& mine = round_grads[static_cast<std::size_t>(n)];
        mine.clear();
        for (const auto& g : bwd.grads) mine.push_back(flatten_layer(g));
      }
    });

    for (int m = 0; m < M; ++m) net.entity_average(topo, m);
    TraceRow row;
    row.round = t;
    for (int m = 0; m < M - 1; ++m) {
      if (t % sched.interval(m) == 0) {
        net.fed_aggregate(topo, m);
        row.aggregated_tiers.push_back(m + 1);
      }
    }
    net.bump_round();

    const ModelParams aggregate = net.virtual_aggregate(topo);
    row.loss_on_aggregate = aggregate_loss(net.arch(), aggregate, data);
    for (int m = 0; m < M - 1; ++m) row.divergence.push_back(net.tier_divergence(topo, m));
    trace.best_loss = std::min(trace.best_loss, row.loss_on_aggregate);
    trace.rows.push_back(std::move(row));

    if (snapshot_round) {
      GradSnapshot snap;
      snap.client_layer_grads = round_grads;
      trace.snapshots.snapshots.push_back(std::move(snap));
      trace.snapshots.probes.push_back(full_batch_probe(net.arch(), aggregate, data));
    }
  }

  for (int n = 0; n < N; ++n)
    for (int l = 0; l < L; ++l)
      trace.max_layer_grad_sq[static_cast<std::size_t>(l)] =
          std::max(trace.max_layer_grad_sq[static_cast<std::size_t>(l)],
                   client_max[static_cast<std::size_t>(n)][static_cast<std::size_t>(l)]);
  trace.final_aggregate = net.virtual_aggregate(topo);
  return trace;
}

EstimatedStats estimate_params(const GradTrace& trace) {
  if (trace.snapshots.size() < 2)
    throw InvalidArgumentError("parameter estimation needs at least 2 gradient snapshots");
  const auto L = static_cast<std::size_t>(trace.num_layers);
  EstimatedStats stats;
  stats.grad_second_moment.assign(L, 0.0);
  stats.grad_variance.assign(L, 0.0);
  for (const auto& snap : trace.snapshots) {
    const std::size_t clients = snap.client_layer_grads.size();
    if (clients == 0) throw InvalidArgumentError("snapshot without client gradients");
    for (std::size_t l = 0; l < L; ++l) {
      Eigen::VectorXd mean = snap.client_layer_grads[0][l];
      for (std::size_t n = 1; n < clients; ++n) mean += snap.client_layer_grads[n][l];
      mean /= static_cast<double>(clients);
      double var = 0.0;
      for (std::size_t n = 0; n < clients; ++n) {
        const auto& g = snap.client_layer_grads[n][l];
        stats.grad_second_moment[l] = std::max(stats.grad_second_moment[l], g.squaredNorm());
        var += (g - mean).squaredNorm();
      }
      stats.grad_variance[l] = std::max(stats.grad_variance[l], var / static_cast<double>(clients));
    }
  }
  for (std::size_t i = 0; i < trace.probes.size(); ++i) {
    for (std::size_t j = i + 1; j < trace.probes.size(); ++j) {
      const double dw = (trace.probes[i].point - trace.probes[j].point).norm();
      if (dw <= 1e-12) continue;
      const double dg = (trace.probes[i].grad - trace.probes[j].grad).norm();
      stats.beta = std::max(stats.beta, dg / dw);
    }
  }
  return stats;
}

}  // namespace hsfl
