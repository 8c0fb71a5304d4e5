#include "rankgan/nn.hpp"

#include <algorithm>
#include <cmath>

#include "rankgan/errors.hpp"

namespace rankgan {

void ModelParams::add(std::string name, Tensor value) {
  if (frozen_) throw FrozenError("ModelParams::add on frozen parameters");
  for (const Entry& e : entries_) {
    if (e.name == name) throw ConfigError("ModelParams: duplicate parameter name '" + name + "'");
  }
  entries_.push_back({std::move(name), std::move(value)});
}

const Tensor& ModelParams::at(std::string_view name) const {
  for (const Entry& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw ConfigError("ModelParams: no parameter named '" + std::string(name) + "'");
}

Tensor& ModelParams::mutable_at(std::string_view name) {
  if (frozen_) {
    throw FrozenError("ModelParams: parameter '" + std::string(name) + "' belongs to a frozen model");
  }
  return const_cast<Tensor&>(std::as_const(*this).at(name));
}

ModelParams ModelParams::clone() const {
  ModelParams copy;
  copy.entries_ = entries_;
  return copy;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) n += e.value.numel();
  return n;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.entries_.size() != b.entries_.size() || a.frozen_ != b.frozen_) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    if (a.entries_[i].name != b.entries_[i].name || !(a.entries_[i].value == b.entries_[i].value)) {
      return false;
    }
  }
  return true;
}

std::string_view to_string(HiddenActivation a) {
  switch (a) {
    case HiddenActivation::LeakyRelu: return "leaky_relu";
    case HiddenActivation::Tanh: return "tanh";
  }
  return "?";
}

std::string_view to_string(OutputActivation a) {
  switch (a) {
    case OutputActivation::Identity: return "identity";
    case OutputActivation::Tanh: return "tanh";
    case OutputActivation::Sigmoid: return "sigmoid";
  }
  return "?";
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw ConfigError("MlpSpec: need at least 2 layer widths");
  if (std::any_of(widths.begin(), widths.end(), [](std::size_t w) { return w == 0; })) {
    throw ConfigError("MlpSpec: layer widths must be positive");
  }
  if (!(slope > 0.0 && slope < 1.0)) throw ConfigError("MlpSpec: leaky slope must lie in (0, 1)");
}

namespace {

std::string weight_name(std::size_t layer) { return "layer" + std::to_string(layer) + ".weight"; }
std::string bias_name(std::size_t layer) { return "layer" + std::to_string(layer) + ".bias"; }

}  // namespace

Mlp init_mlp(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  Mlp model{spec, {}};
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const std::size_t in = spec.widths[l], out = spec.widths[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    model.params.add(weight_name(l), uniform({in, out}, -bound, bound, rng));
    model.params.add(bias_name(l), Tensor::zeros({out}));
  }
  return model;
}

Mlp zero_mlp(const MlpSpec& spec) {
  spec.validate();
  Mlp model{spec, {}};
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    model.params.add(weight_name(l), Tensor::zeros({spec.widths[l], spec.widths[l + 1]}));
    model.params.add(bias_name(l), Tensor::zeros({spec.widths[l + 1]}));
  }
  return model;
}

BoundParams::BoundParams(const ModelParams& params, bool track) {
  for (const auto& e : params.entries()) {
    names_.push_back(e.name);
    vars_.emplace_back(e.value, track);
  }
}

GradMap BoundParams::grads(const Var& loss) const {
  std::vector<Var> g = grad(loss, vars_);
  GradMap out;
  for (std::size_t i = 0; i < names_.size(); ++i) out.emplace(names_[i], g[i].value());
  return out;
}

Var mlp_forward(const MlpSpec& spec, std::span<const Var> params, const Var& input) {
  const std::size_t layers = spec.widths.size() - 1;
  if (params.size() != 2 * layers) {
    throw ShapeError("mlp_forward: expected " + std::to_string(2 * layers) + " parameter tensors, got " +
                     std::to_string(params.size()));
  }
  if (input.shape().size() != 2 || input.shape()[1] != spec.input_width()) {
    throw ShapeError("mlp_forward: input shape " + shape_str(input.shape()) +
                     " does not match input width " + std::to_string(spec.input_width()));
  }
  Var h = input;
  for (std::size_t l = 0; l < layers; ++l) {
    h = matmul(h, params[2 * l]) + params[2 * l + 1];
    if (l + 1 < layers) {
      h = spec.hidden == HiddenActivation::LeakyRelu ? leaky_relu(h, spec.slope) : tanh(h);
    } else if (spec.output == OutputActivation::Tanh) {
      h = tanh(h);
    } else if (spec.output == OutputActivation::Sigmoid) {
      h = sigmoid(h);
    }
  }
  return h;
}

Tensor mlp_forward(const Mlp& model, const Tensor& input) {
  NoGradGuard no_grad;
  BoundParams bound(model.params, false);
  return mlp_forward(model.spec, bound.vars(), Var(input)).value();
}

EncoderOutput encoder_forward(const MlpSpec& spec, std::span<const Var> params, const Var& x) {
  if (spec.output_width() % 2 != 0) {
    throw ConfigError("encoder_forward: output width " + std::to_string(spec.output_width()) +
                      " is odd; it must be 2 x latent-dim");
  }
  const std::size_t latent = spec.output_width() / 2;
  Var out = mlp_forward(spec, params, x);
  return {slice(out, 1, 0, latent), slice(out, 1, latent, 2 * latent)};
}

EncoderOutput encoder_forward(const Mlp& encoder, const Tensor& x) {
  NoGradGuard no_grad;
  BoundParams bound(encoder.params, false);
  return encoder_forward(encoder.spec, bound.vars(), Var(x));
}

Var sample_latent(const EncoderOutput& enc, const Var& noise) {
  if (noise.shape() != enc.mu.shape() || enc.logvar.shape() != enc.mu.shape()) {
    throw ShapeError("sample_latent: mu " + shape_str(enc.mu.shape()) + ", logvar " +
                     shape_str(enc.logvar.shape()) + ", noise " + shape_str(noise.shape()) +
                     " must match");
  }
  return enc.mu + exp(enc.logvar * 0.5) * noise;
}

Var vae_loss(const Var& x, const Var& reconstruction, const EncoderOutput& enc, double kl_weight) {
  if (x.shape() != reconstruction.shape()) {
    throw ShapeError("vae_loss: input " + shape_str(x.shape()) + " vs reconstruction " +
                     shape_str(reconstruction.shape()));
  }
  Var mse = mean(square(x - reconstruction));
  Var kl_terms = square(enc.mu) + exp(enc.logvar) - enc.logvar - 1.0;
  const double batch = static_cast<double>(enc.mu.shape()[0]);
  Var kl = sum(kl_terms) * (0.5 / batch);
  return mse + kl * kl_weight;
}

}  // namespace rankgan
