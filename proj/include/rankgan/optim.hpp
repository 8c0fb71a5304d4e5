#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "rankgan/nn.hpp"

namespace rankgan {

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double eps = 1e-8;
};

struct AdamState {
  std::uint64_t step_count = 0;
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
};

// Adam with bias correction:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  // Throws FrozenError for frozen params, ConfigError for a missing gradient
  // and ShapeError for a gradient of the wrong shape.
  void step(ModelParams& params, const GradMap& grads);

  const AdamConfig& config() const noexcept { return config_; }
  const AdamState& state() const noexcept { return state_; }

 private:
  AdamConfig config_;
  AdamState state_;
};

// Adam over a single free tensor (used for latent search).
class TensorAdam {
 public:
  explicit TensorAdam(AdamConfig config) : config_(config) {}
  // `lr_scale` multiplies the configured learning rate for this step.
  void step(Tensor& value, const Tensor& grad, double lr_scale = 1.0);
  std::uint64_t step_count() const noexcept { return step_count_; }

 private:
  AdamConfig config_;
  std::uint64_t step_count_ = 0;
  Tensor m_, v_;
};

}  // namespace rankgan
