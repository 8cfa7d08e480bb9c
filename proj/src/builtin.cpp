#include <cmath>

#include "hsfl/errors.hpp"
#include "hsfl/model_profile.hpp"

namespace hsfl {

namespace {

LayerProfile conv_layer(int h, int w, int c_in, int c_out, double g2, double s2) {
  LayerProfile l;
  const double macs = static_cast<double>(h) * w * 9.0 * c_in * c_out;  // 3x3 kernels
  l.fp_flops = 2.0 * macs;
  l.bp_flops = 4.0 * macs;
  l.activation_bytes = static_cast<double>(h) * w * c_out * 4.0;
  l.act_grad_bytes = l.activation_bytes;
  l.param_bytes = (9.0 * c_in * c_out + c_out) * 4.0;
  l.optimizer_state_bytes = 0.0;  // plain SGD carries no state
  l.grad_second_moment = g2;
  l.grad_variance = s2;
  return l;
}

LayerProfile fc_layer(int in, int out, double g2, double s2) {
  LayerProfile l;
  const double macs = static_cast<double>(in) * out;
  l.fp_flops = 2.0 * macs;
  l.bp_flops = 4.0 * macs;
  l.activation_bytes = out * 4.0;
  l.act_grad_bytes = l.activation_bytes;
  l.param_bytes = (macs + out) * 4.0;
  l.optimizer_state_bytes = 0.0;
  l.grad_second_moment = g2;
  l.grad_variance = s2;
  return l;
}

// 13 convolution layers and 3 fully connected layers at 32x32 input, with
// pooling after layers 2, 4, 7, 10 and 13. Gradient bounds grow with depth.
ModelProfile make_vgg16() {
  std::vector<LayerProfile> layers;
  const double g2[] = {1e-4, 1.5e-4, 2e-4, 0.05, 0.08, 0.12, 0.15, 0.2,
                       0.25, 0.3,    0.3,  0.3,  0.3,  0.4,  0.4,  0.5};
  int i = 0;
  auto g = [&] { return g2[i]; };
  auto s = [&] { return g2[i] / 10.0; };
  layers.push_back(conv_layer(32, 32, 3, 64, g(), s())); ++i;
  layers.push_back(conv_layer(32, 32, 64, 64, g(), s())); ++i;
  layers.push_back(conv_layer(16, 16, 64, 128, g(), s())); ++i;
  layers.push_back(conv_layer(16, 16, 128, 128, g(), s())); ++i;
  layers.push_back(conv_layer(8, 8, 128, 256, g(), s())); ++i;
  layers.push_back(conv_layer(8, 8, 256, 256, g(), s())); ++i;
  layers.push_back(conv_layer(8, 8, 256, 256, g(), s())); ++i;
  layers.push_back(conv_layer(4, 4, 256, 512, g(), s())); ++i;
  layers.push_back(conv_layer(4, 4, 512, 512, g(), s())); ++i;
  layers.push_back(conv_layer(4, 4, 512, 512, g(), s())); ++i;
  layers.push_back(conv_layer(2, 2, 512, 512, g(), s())); ++i;
  layers.push_back(conv_layer(2, 2, 512, 512, g(), s())); ++i;
  layers.push_back(conv_layer(2, 2, 512, 512, g(), s())); ++i;
  layers.push_back(fc_layer(512, 512, g(), s())); ++i;
  layers.push_back(fc_layer(512, 512, g(), s())); ++i;
  layers.push_back(fc_layer(512, 10, g(), s()));
  return ModelProfile("vgg16", std::move(layers));
}

LayerProfile dense_layer(int in, int out, double g2, double s2) {
  LayerProfile l;
  l.fp_flops = 2.0 * in * out + 2.0 * out;  // matmul plus bias and activation
  l.bp_flops = 2.0 * l.fp_flops;
  l.activation_bytes = out * 8.0;  // the desk trainer runs in doubles
  l.act_grad_bytes = l.activation_bytes;
  l.param_bytes = (static_cast<double>(in) * out + out) * 8.0;
  l.optimizer_state_bytes = 0.0;
  l.grad_second_moment = g2;
  l.grad_variance = s2;
  return l;
}

// The desk-scale trainer's default architecture: 16-32-64-32-2. The gradient
// bounds are measured values from a shard-partitioned training run (see the
// estimate-params command).
ModelProfile make_tinymlp() {
  std::vector<LayerProfile> layers;
  layers.push_back(dense_layer(16, 32, 0.4, 0.04));
  layers.push_back(dense_layer(32, 64, 0.3, 0.03));
  layers.push_back(dense_layer(64, 32, 0.2, 0.02));
  layers.push_back(dense_layer(32, 2, 0.6, 0.06));
  return ModelProfile("tinymlp", std::move(layers));
}

}  // namespace

ModelProfile builtin_profile(const std::string& name) {
  if (name == "vgg16") return make_vgg16();
  if (name == "tinymlp") return make_tinymlp();
  throw InvalidArgumentError("unknown builtin profile: " + name +
                             " (available: vgg16, tinymlp)");
}

}  // namespace hsfl
