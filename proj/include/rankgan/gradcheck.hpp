#pragma once

#include <functional>
#include <span>
#include <vector>

#include "rankgan/autodiff.hpp"

namespace rankgan {

// Scalar-valued function of a list of parameter nodes.
using ScalarFn = std::function<Var(std::span<const Var>)>;

enum class CheckOrder { First = 1, Second = 2 };

// Compares autodiff against central differences and returns
// max_i |ad_i - fd_i| / (|fd_i| + 1e-8) over every parameter coordinate.
//
// First order: ad = grad(f), fd = (f(p + h e_i) - f(p - h e_i)) / 2h.
// Second order: the checked function is F(p) = ||grad(f)(p)||_2, built with
// create_graph so that ad = grad(F) differentiates through the inner backward
// pass; fd differences F evaluated with first-order autodiff.
//
// `step` must lie in [1e-6, 1e-3]. Throws NumericError if f is non-finite.
double finite_difference_check(const ScalarFn& f, std::span<const Tensor> params, double step,
                               CheckOrder order = CheckOrder::First);

// Central-difference gradient of f at params (one Tensor per parameter).
std::vector<Tensor> central_difference(const std::function<double(std::span<const Tensor>)>& f,
                                       std::span<const Tensor> params, double step);

}  // namespace rankgan
