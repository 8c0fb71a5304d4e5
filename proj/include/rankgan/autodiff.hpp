#pragma once

// Define-by-run reverse-mode autodiff over Tensor values.
//
// Every operation returns a Var whose node remembers its parents and a
// backward rule. Backward rules are themselves written with Var operations,
// so running grad() with create_graph=true yields gradients that can be
// differentiated again (double backpropagation). With create_graph=false the
// backward pass runs with recording disabled and the returned gradients are
// plain constants.
//
// Conventions at kinks (fixed so tests are deterministic):
//   relu(x)          subgradient 0 at x == 0
//   leaky_relu(x)    negative-slope branch at x == 0
//   abs(x)           subgradient 0 at x == 0
//   pow(x, p), p < 0 value and gradient 0 at x == 0 (so sqrt' (0) == 0)

#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "rankgan/tensor.hpp"

namespace rankgan {

class Var;

namespace detail {

using BackwardFn = std::function<std::vector<Var>(const Var& grad_out)>;

struct Node {
  Tensor value;
  std::vector<Var> parents;
  BackwardFn backward;
  std::string_view op;
  bool requires_grad = false;
};

}  // namespace detail

// Handle to a node of the computation graph. Cheap to copy; values are
// immutable once created.
class Var {
 public:
  Var();
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t numel() const { return node_->value.numel(); }
  double item() const { return node_->value.item(); }
  bool requires_grad() const { return node_->requires_grad; }
  std::string_view op() const { return node_->op; }
  bool is_leaf() const { return node_->parents.empty(); }

  // Same value, cut from the graph.
  Var detach() const { return Var(node_->value, false); }

  const detail::Node* node() const { return node_.get(); }

 private:
  friend Var make_op_result(Tensor value, std::string_view op, std::vector<Var> parents,
                            detail::BackwardFn backward);
  std::shared_ptr<const detail::Node> node_;
};

// Builds a result node. Parents and backward rule are dropped when recording
// is disabled or no parent requires a gradient.
Var make_op_result(Tensor value, std::string_view op, std::vector<Var> parents,
                   detail::BackwardFn backward);

bool grad_mode_enabled();

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// ---- primitives ---------------------------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
// log(1 + exp(a)), evaluated without overflow.
Var softplus(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var sqrt(const Var& a);
Var pow(const Var& a, double p);
Var abs(const Var& a);

Var sum(const Var& a);
// Sum over one axis; the axis is removed from the shape.
Var sum(const Var& a, std::size_t axis);
Var mean(const Var& a);
Var mean(const Var& a, std::size_t axis);
Var l1_norm(const Var& a);
Var l2_norm(const Var& a);

Var reshape(const Var& a, Shape shape);
Var broadcast_to(const Var& a, const Shape& shape);
Var sum_to(const Var& a, const Shape& shape);
// Elements [begin, end) along `axis`.
Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end);
Var concat(std::span<const Var> parts, std::size_t axis);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator+(const Var& a, double s) { return add_scalar(a, s); }
inline Var operator+(double s, const Var& a) { return add_scalar(a, s); }
inline Var operator-(const Var& a, double s) { return add_scalar(a, -s); }
inline Var operator-(double s, const Var& a) { return add_scalar(neg(a), s); }
inline Var operator*(const Var& a, double s) { return mul_scalar(a, s); }
inline Var operator*(double s, const Var& a) { return mul_scalar(a, s); }

// ---- differentiation ----------------------------------------------------

// d output / d wrt[i] for each i. `output` must hold a single value. Entries of
// `wrt` that do not influence `output` get zero gradients. Throws NumericError
// naming the operation if a backward rule produces NaN.
std::vector<Var> grad(const Var& output, std::span<const Var> wrt, bool create_graph = false);

}  // namespace rankgan
