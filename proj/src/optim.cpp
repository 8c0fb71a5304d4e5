#include "rankgan/optim.hpp"

#include <cmath>

#include "rankgan/errors.hpp"

namespace rankgan {

namespace {

void adam_update(Tensor& value, const Tensor& g, Tensor& m, Tensor& v, const AdamConfig& c,
                 std::uint64_t t, double lr) {
  const double c1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  auto pv = value.data();
  auto pg = g.data();
  auto pm = m.data();
  auto ps = v.data();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    pm[i] = c.beta1 * pm[i] + (1.0 - c.beta1) * pg[i];
    ps[i] = c.beta2 * ps[i] + (1.0 - c.beta2) * pg[i] * pg[i];
    const double m_hat = pm[i] / c1;
    const double v_hat = ps[i] / c2;
    pv[i] -= lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

}  // namespace

void Adam::step(ModelParams& params, const GradMap& grads) {
  if (params.frozen()) throw FrozenError("Adam::step: parameters are frozen");
  for (const auto& e : params.entries()) {
    auto it = grads.find(e.name);
    if (it == grads.end()) throw ConfigError("Adam::step: missing gradient for '" + e.name + "'");
    if (it->second.shape() != e.value.shape()) {
      throw ShapeError("Adam::step: gradient for '" + e.name + "' has shape " +
                       shape_str(it->second.shape()) + ", parameter has " + shape_str(e.value.shape()));
    }
  }
  ++state_.step_count;
  for (const auto& e : params.entries()) {
    const std::string& name = e.name;
    auto m_it = state_.first_moment.try_emplace(name, Tensor::zeros(e.value.shape())).first;
    auto v_it = state_.second_moment.try_emplace(name, Tensor::zeros(e.value.shape())).first;
    adam_update(params.mutable_at(name), grads.at(name), m_it->second, v_it->second, config_,
                state_.step_count, config_.lr);
  }
}

void TensorAdam::step(Tensor& value, const Tensor& grad, double lr_scale) {
  if (grad.shape() != value.shape()) {
    throw ShapeError("TensorAdam::step: gradient " + shape_str(grad.shape()) + " vs value " +
                     shape_str(value.shape()));
  }
  if (m_.shape() != value.shape() || step_count_ == 0) {
    m_ = Tensor::zeros(value.shape());
    v_ = Tensor::zeros(value.shape());
  }
  ++step_count_;
  adam_update(value, grad, m_, v_, config_, step_count_, config_.lr * lr_scale);
}

}  // namespace rankgan
