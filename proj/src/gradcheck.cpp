#include "rankgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rankgan/errors.hpp"

namespace rankgan {

namespace {

std::vector<Var> as_leaves(std::span<const Tensor> params) {
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.emplace_back(p, true);
  return leaves;
}

double checked(double v) {
  if (!std::isfinite(v)) throw NumericError("finite_difference_check: function returned " + std::to_string(v));
  return v;
}

// ||grad f||_2 over all parameters; differentiable when create_graph is set.
Var gradient_norm(const ScalarFn& f, std::span<const Var> leaves, bool create_graph) {
  Var out = f(leaves);
  std::vector<Var> g = grad(out, leaves, create_graph);
  Var total = sum(square(g[0]));
  for (std::size_t i = 1; i < g.size(); ++i) total = total + sum(square(g[i]));
  return sqrt(total);
}

}  // namespace

std::vector<Tensor> central_difference(const std::function<double(std::span<const Tensor>)>& f,
                                       std::span<const Tensor> params, double step) {
  std::vector<Tensor> work(params.begin(), params.end());
  std::vector<Tensor> out;
  for (std::size_t p = 0; p < work.size(); ++p) {
    Tensor g = Tensor::zeros(work[p].shape());
    for (std::size_t i = 0; i < work[p].numel(); ++i) {
      const double orig = work[p][i];
      work[p][i] = orig + step;
      const double up = checked(f(work));
      work[p][i] = orig - step;
      const double down = checked(f(work));
      work[p][i] = orig;
      g[i] = (up - down) / (2.0 * step);
    }
    out.push_back(std::move(g));
  }
  return out;
}

double finite_difference_check(const ScalarFn& f, std::span<const Tensor> params, double step,
                               CheckOrder order) {
  if (!(step >= 1e-6 && step <= 1e-3)) {
    throw ShapeError("finite_difference_check: step " + std::to_string(step) +
                     " outside [1e-6, 1e-3]");
  }

  std::vector<Var> leaves = as_leaves(params);
  std::vector<Var> ad;
  std::function<double(std::span<const Tensor>)> value;

  if (order == CheckOrder::First) {
    Var out = f(leaves);
    checked(out.item());
    ad = grad(out, leaves);
    value = [&f](std::span<const Tensor> p) {
      NoGradGuard no_grad;
      std::vector<Var> consts(p.begin(), p.end());
      return f(consts).item();
    };
  } else {
    Var norm = gradient_norm(f, leaves, true);
    checked(norm.item());
    ad = grad(norm, leaves);
    value = [&f](std::span<const Tensor> p) {
      std::vector<Var> l = as_leaves(p);
      return gradient_norm(f, l, false).item();
    };
  }

  std::vector<Tensor> fd = central_difference(value, params, step);
  double worst = 0.0;
  for (std::size_t p = 0; p < fd.size(); ++p) {
    for (std::size_t i = 0; i < fd[p].numel(); ++i) {
      const double a = ad[p].value()[i];
      const double d = fd[p][i];
      worst = std::max(worst, std::fabs(a - d) / (std::fabs(d) + 1e-8));
    }
  }
  return worst;
}

}  // namespace rankgan
