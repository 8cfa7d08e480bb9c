#include "hsfl/model_profile.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hsfl/errors.hpp"

namespace hsfl {

using nlohmann::json;

namespace {

constexpr const char* kFileHeader =
    "// hsfl model profile\n"
    "// units: fp_flops/bp_flops in FLOPs per sample; activation_bytes,\n"
    "// act_grad_bytes in bytes per sample; param_bytes, optimizer_state_bytes\n"
    "// in bytes; grad_variance, grad_second_moment are per-layer bounds on the\n"
    "// stochastic gradient variance and second moment.\n";

void check_prefix(int prefix, int num_layers) {
  if (prefix < 0 || prefix > num_layers)
    throw InvalidArgumentError("layer prefix " + std::to_string(prefix) + " outside [0, " +
                               std::to_string(num_layers) + "]");
}

std::vector<double> prefix_sum(const std::vector<LayerProfile>& layers,
                               double LayerProfile::*field) {
  std::vector<double> out(layers.size() + 1, 0.0);
  for (std::size_t i = 0; i < layers.size(); ++i) out[i + 1] = out[i] + layers[i].*field;
  return out;
}

}  // namespace

ModelProfile::ModelProfile(std::string name, std::vector<LayerProfile> layers)
    : name_(std::move(name)), layers_(std::move(layers)) {
  if (layers_.size() < 2)
    throw InvalidArgumentError("model profile needs at least 2 layers, got " +
                               std::to_string(layers_.size()));
  int index = 0;
  for (const auto& l : layers_) {
    const double fields[] = {l.fp_flops,    l.bp_flops,       l.activation_bytes,
                             l.act_grad_bytes, l.param_bytes, l.optimizer_state_bytes,
                             l.grad_variance,  l.grad_second_moment};
    for (double v : fields) {
      if (!(v >= 0.0))
        throw InvalidArgumentError("negative or non-finite value in layer " +
                                   std::to_string(index));
    }
    ++index;
  }
  fp_prefix_ = prefix_sum(layers_, &LayerProfile::fp_flops);
  bp_prefix_ = prefix_sum(layers_, &LayerProfile::bp_flops);
  act_prefix_ = prefix_sum(layers_, &LayerProfile::activation_bytes);
  act_grad_prefix_ = prefix_sum(layers_, &LayerProfile::act_grad_bytes);
  param_prefix_ = prefix_sum(layers_, &LayerProfile::param_bytes);
  opt_prefix_ = prefix_sum(layers_, &LayerProfile::optimizer_state_bytes);
  second_moment_prefix_ = prefix_sum(layers_, &LayerProfile::grad_second_moment);
}

const LayerProfile& ModelProfile::layer(int index) const {
  if (index < 0 || index >= num_layers())
    throw InvalidArgumentError("layer index out of range");
  return layers_[static_cast<std::size_t>(index)];
}

double ModelProfile::cumulative_fp_flops(int prefix, int batch) const {
  check_prefix(prefix, num_layers());
  if (batch < 1) throw InvalidArgumentError("batch size must be >= 1");
  return static_cast<double>(batch) * fp_prefix_[static_cast<std::size_t>(prefix)];
}

double ModelProfile::cumulative_bp_flops(int prefix, int batch) const {
  check_prefix(prefix, num_layers());
  if (batch < 1) throw InvalidArgumentError("batch size must be >= 1");
  return static_cast<double>(batch) * bp_prefix_[static_cast<std::size_t>(prefix)];
}

double ModelProfile::cumulative_bytes(int prefix, ByteKind kind) const {
  check_prefix(prefix, num_layers());
  const auto i = static_cast<std::size_t>(prefix);
  switch (kind) {
    case ByteKind::activation: return act_prefix_[i];
    case ByteKind::act_grad: return act_grad_prefix_[i];
    case ByteKind::param: return param_prefix_[i];
    case ByteKind::optimizer_state: return opt_prefix_[i];
  }
  throw InvalidArgumentError("unknown byte kind");
}

double ModelProfile::cumulative_second_moment(int prefix) const {
  check_prefix(prefix, num_layers());
  return second_moment_prefix_[static_cast<std::size_t>(prefix)];
}

std::string ModelProfile::serialize() const {
  json layers = json::array();
  for (const auto& l : layers_) {
    layers.push_back({{"fp_flops", l.fp_flops},
                      {"bp_flops", l.bp_flops},
                      {"activation_bytes", l.activation_bytes},
                      {"act_grad_bytes", l.act_grad_bytes},
                      {"param_bytes", l.param_bytes},
                      {"optimizer_state_bytes", l.optimizer_state_bytes},
                      {"grad_variance", l.grad_variance},
                      {"grad_second_moment", l.grad_second_moment}});
  }
  const json doc = {{"name", name_}, {"layers", layers}};
  return std::string(kFileHeader) + doc.dump(2) + "\n";
}

ModelProfile ModelProfile::parse(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("profile parse error: ") + e.what());
  }
  try {
    std::vector<LayerProfile> layers;
    for (const auto& jl : doc.at("layers")) {
      LayerProfile l;
      l.fp_flops = jl.at("fp_flops").get<double>();
      l.bp_flops = jl.at("bp_flops").get<double>();
      l.activation_bytes = jl.at("activation_bytes").get<double>();
      l.act_grad_bytes = jl.at("act_grad_bytes").get<double>();
      l.param_bytes = jl.at("param_bytes").get<double>();
      l.optimizer_state_bytes = jl.value("optimizer_state_bytes", 0.0);
      l.grad_variance = jl.value("grad_variance", 0.0);
      l.grad_second_moment = jl.value("grad_second_moment", 0.0);
      layers.push_back(l);
    }
    return ModelProfile(doc.at("name").get<std::string>(), std::move(layers));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("profile schema error: ") + e.what());
  } catch (const InvalidArgumentError& e) {
    throw ConfigError(std::string("profile validation error: ") + e.what());
  }
}

ModelProfile ModelProfile::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open profile file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void ModelProfile::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write profile file: " + path);
  out << serialize();
}

bool ModelProfile::operator==(const ModelProfile& other) const {
  if (name_ != other.name_ || layers_.size() != other.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& a = layers_[i];
    const auto& b = other.layers_[i];
    if (a.fp_flops != b.fp_flops || a.bp_flops != b.bp_flops ||
        a.activation_bytes != b.activation_bytes || a.act_grad_bytes != b.act_grad_bytes ||
        a.param_bytes != b.param_bytes || a.optimizer_state_bytes != b.optimizer_state_bytes ||
        a.grad_variance != b.grad_variance || a.grad_second_moment != b.grad_second_moment)
      return false;
  }
  return true;
}

ModelProfile with_gradient_stats(const ModelProfile& profile,
                                 const std::vector<double>& grad_variance,
                                 const std::vector<double>& grad_second_moment) {
  const auto L = static_cast<std::size_t>(profile.num_layers());
  if (grad_variance.size() != L || grad_second_moment.size() != L)
    throw InvalidArgumentError("gradient stats length does not match profile layer count");
  std::vector<LayerProfile> layers = profile.layers();
  for (std::size_t i = 0; i < L; ++i) {
    layers[i].grad_variance = grad_variance[i];
    layers[i].grad_second_moment = grad_second_moment[i];
  }
  return ModelProfile(profile.name(), std::move(layers));
}

}  // namespace hsfl
