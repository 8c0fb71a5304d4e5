#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rankgan/autodiff.hpp"
#include "rankgan/rng.hpp"

namespace rankgan {

// Gradient per parameter name, same shape as the parameter.
using GradMap = std::map<std::string, Tensor>;

// Named, ordered parameter collection. A frozen set refuses mutable access.
class ModelParams {
 public:
  struct Entry {
    std::string name;
    Tensor value;
  };

  void add(std::string name, Tensor value);

  std::size_t size() const noexcept { return entries_.size(); }
  std::span<const Entry> entries() const noexcept { return entries_; }
  const Tensor& at(std::string_view name) const;
  // Throws FrozenError when frozen.
  Tensor& mutable_at(std::string_view name);

  bool frozen() const noexcept { return frozen_; }
  void freeze() noexcept { frozen_ = true; }
  // Deep copy with the frozen flag cleared.
  ModelParams clone() const;

  std::size_t parameter_count() const;

  friend bool operator==(const ModelParams& a, const ModelParams& b);

 private:
  std::vector<Entry> entries_;
  bool frozen_ = false;
};

enum class HiddenActivation { LeakyRelu, Tanh };
enum class OutputActivation { Identity, Tanh, Sigmoid };

std::string_view to_string(HiddenActivation a);
std::string_view to_string(OutputActivation a);

struct MlpSpec {
  std::vector<std::size_t> widths;
  HiddenActivation hidden = HiddenActivation::LeakyRelu;
  double slope = 0.2;
  OutputActivation output = OutputActivation::Identity;

  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
  // Throws ConfigError unless >= 2 positive widths and slope in (0, 1).
  void validate() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct Mlp {
  MlpSpec spec;
  ModelParams params;
};

// Glorot-uniform weights "layer<k>.weight" [in x out], zero biases
// "layer<k>.bias" [out].
Mlp init_mlp(const MlpSpec& spec, Rng& rng);
Mlp zero_mlp(const MlpSpec& spec);

// Leaf nodes for one forward/backward pass over a parameter set.
class BoundParams {
 public:
  BoundParams(const ModelParams& params, bool track);

  std::span<const Var> vars() const noexcept { return vars_; }
  GradMap grads(const Var& loss) const;

 private:
  std::vector<std::string> names_;
  std::vector<Var> vars_;
};

Var mlp_forward(const MlpSpec& spec, std::span<const Var> params, const Var& input);
// Untracked convenience evaluation.
Tensor mlp_forward(const Mlp& model, const Tensor& input);

struct EncoderOutput {
  Var mu;
  Var logvar;
};

// Splits the encoder's 2*latent outputs into mean and log-variance halves.
EncoderOutput encoder_forward(const MlpSpec& spec, std::span<const Var> params, const Var& x);
EncoderOutput encoder_forward(const Mlp& encoder, const Tensor& x);

// z = mu + exp(logvar / 2) * noise.
Var sample_latent(const EncoderOutput& enc, const Var& noise);

// Mean squared reconstruction error plus kl_weight * batch-mean of
// 0.5 * sum(mu^2 + sigma^2 - log sigma^2 - 1).
Var vae_loss(const Var& x, const Var& reconstruction, const EncoderOutput& enc, double kl_weight = 1.0);

}  // namespace rankgan
