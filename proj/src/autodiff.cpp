#include "rankgan/autodiff.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "rankgan/errors.hpp"

namespace rankgan {

namespace {

thread_local bool g_grad_enabled = true;

template <typename F>
Tensor map1(const Tensor& a, F f) {
  std::vector<double> out(a.numel());
  auto d = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(d[i]);
  return Tensor(a.shape(), std::move(out));
}

Shape keepdim_shape(const Shape& s, std::size_t axis) {
  Shape out = s;
  out[axis] = 1;
  return out;
}

Shape dropdim_shape(const Shape& s, std::size_t axis) {
  Shape out = s;
  out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  return out;
}

void check_axis(const Var& a, std::size_t axis, std::string_view op) {
  if (axis >= a.shape().size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(a.shape()));
  }
}

// outer = product of dims before axis, inner = product of dims after axis.
std::pair<std::size_t, std::size_t> outer_inner(const Shape& s, std::size_t axis) {
  std::size_t outer = 1, inner = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= s[k];
  for (std::size_t k = axis + 1; k < s.size(); ++k) inner *= s[k];
  return {outer, inner};
}

Tensor slice_value(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  Shape shape = a.shape();
  const std::size_t full = shape[axis];
  shape[axis] = end - begin;
  auto [outer, inner] = outer_inner(a.shape(), axis);
  std::vector<double> out;
  out.reserve(shape_numel(shape));
  auto d = a.data();
  for (std::size_t o = 0; o < outer; ++o) {
    const double* base = d.data() + (o * full + begin) * inner;
    out.insert(out.end(), base, base + (end - begin) * inner);
  }
  return Tensor(std::move(shape), std::move(out));
}

// Places `part` at offset `begin` along `axis` inside zeros of `full_shape`.
Var embed(const Var& part, const Shape& full_shape, std::size_t axis, std::size_t begin) {
  const std::size_t len = part.shape()[axis];
  const std::size_t full = full_shape[axis];
  auto [outer, inner] = outer_inner(full_shape, axis);
  std::vector<double> out(shape_numel(full_shape), 0.0);
  auto d = part.value().data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(d.data() + o * len * inner, len * inner, out.data() + (o * full + begin) * inner);
  }
  return make_op_result(Tensor(full_shape, std::move(out)), "embed", {part},
                        [axis, begin, len](const Var& g) {
                          return std::vector<Var>{slice(g, axis, begin, begin + len)};
                        });
}

}  // namespace

Var::Var() : Var(Tensor()) {}

Var::Var(Tensor value, bool requires_grad) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->op = "leaf";
  node_ = std::move(node);
}

Var make_op_result(Tensor value, std::string_view op, std::vector<Var> parents,
                   detail::BackwardFn backward) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->op = op;
  bool needs = false;
  if (g_grad_enabled) {
    for (const Var& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->parents = std::move(parents);
    node->backward = std::move(backward);
    node->requires_grad = true;
  }
  Var v;
  v.node_ = std::move(node);
  return v;
}

bool grad_mode_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// ---- arithmetic -----------------------------------------------------------

Var add(const Var& a, const Var& b) {
  return make_op_result(kernels::add(a.value(), b.value()), "add", {a, b},
                        [sa = a.shape(), sb = b.shape()](const Var& g) {
                          return std::vector<Var>{sum_to(g, sa), sum_to(g, sb)};
                        });
}

Var sub(const Var& a, const Var& b) {
  return make_op_result(kernels::sub(a.value(), b.value()), "sub", {a, b},
                        [sa = a.shape(), sb = b.shape()](const Var& g) {
                          return std::vector<Var>{sum_to(g, sa), sum_to(neg(g), sb)};
                        });
}

Var mul(const Var& a, const Var& b) {
  return make_op_result(kernels::mul(a.value(), b.value()), "mul", {a, b}, [a, b](const Var& g) {
    return std::vector<Var>{sum_to(g * b, a.shape()), sum_to(g * a, b.shape())};
  });
}

Var div(const Var& a, const Var& b) {
  return make_op_result(kernels::div(a.value(), b.value()), "div", {a, b}, [a, b](const Var& g) {
    Var ga = sum_to(div(g, b), a.shape());
    Var gb = sum_to(neg(div(g * a, square(b))), b.shape());
    return std::vector<Var>{ga, gb};
  });
}

Var neg(const Var& a) {
  return make_op_result(kernels::scale(a.value(), -1.0), "neg", {a},
                        [](const Var& g) { return std::vector<Var>{neg(g)}; });
}

Var add_scalar(const Var& a, double s) {
  return make_op_result(map1(a.value(), [s](double x) { return x + s; }), "add_scalar", {a},
                        [](const Var& g) { return std::vector<Var>{g}; });
}

Var mul_scalar(const Var& a, double s) {
  return make_op_result(kernels::scale(a.value(), s), "mul_scalar", {a},
                        [s](const Var& g) { return std::vector<Var>{mul_scalar(g, s)}; });
}

Var matmul(const Var& a, const Var& b) {
  return make_op_result(kernels::matmul(a.value(), b.value()), "matmul", {a, b},
                        [a, b](const Var& g) {
                          return std::vector<Var>{matmul(g, transpose(b)), matmul(transpose(a), g)};
                        });
}

Var transpose(const Var& a) {
  return make_op_result(kernels::transpose(a.value()), "transpose", {a},
                        [](const Var& g) { return std::vector<Var>{transpose(g)}; });
}

// ---- elementwise nonlinearities -------------------------------------------

Var relu(const Var& a) {
  Tensor mask = map1(a.value(), [](double x) { return x > 0.0 ? 1.0 : 0.0; });
  return make_op_result(map1(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }), "relu", {a},
                        [mask = Var(std::move(mask))](const Var& g) {
                          return std::vector<Var>{g * mask};
                        });
}

Var leaky_relu(const Var& a, double slope) {
  Tensor mask = map1(a.value(), [slope](double x) { return x > 0.0 ? 1.0 : slope; });
  return make_op_result(map1(a.value(), [slope](double x) { return x > 0.0 ? x : slope * x; }),
                        "leaky_relu", {a}, [mask = Var(std::move(mask))](const Var& g) {
                          return std::vector<Var>{g * mask};
                        });
}

Var tanh(const Var& a) {
  return make_op_result(map1(a.value(), [](double x) { return std::tanh(x); }), "tanh", {a},
                        [a](const Var& g) {
                          return std::vector<Var>{g * (1.0 - square(tanh(a)))};
                        });
}

Var sigmoid(const Var& a) {
  auto sig = [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  };
  return make_op_result(map1(a.value(), sig), "sigmoid", {a}, [a](const Var& g) {
    Var s = sigmoid(a);
    return std::vector<Var>{g * s * (1.0 - s)};
  });
}

Var softplus(const Var& a) {
  auto sp = [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); };
  return make_op_result(map1(a.value(), sp), "softplus", {a},
                        [a](const Var& g) { return std::vector<Var>{g * sigmoid(a)}; });
}

Var exp(const Var& a) {
  return make_op_result(map1(a.value(), [](double x) { return std::exp(x); }), "exp", {a},
                        [a](const Var& g) { return std::vector<Var>{g * exp(a)}; });
}

Var log(const Var& a) {
  return make_op_result(map1(a.value(), [](double x) { return std::log(x); }), "log", {a},
                        [a](const Var& g) { return std::vector<Var>{div(g, a)}; });
}

Var square(const Var& a) {
  return make_op_result(map1(a.value(), [](double x) { return x * x; }), "square", {a},
                        [a](const Var& g) { return std::vector<Var>{g * a * 2.0}; });
}

Var sqrt(const Var& a) {
  return make_op_result(map1(a.value(), [](double x) { return std::sqrt(x); }), "sqrt", {a},
                        [a](const Var& g) { return std::vector<Var>{g * pow(a, -0.5) * 0.5}; });
}

Var pow(const Var& a, double p) {
  auto f = [p](double x) {
    if (p < 0.0 && x == 0.0) return 0.0;
    return std::pow(x, p);
  };
  return make_op_result(map1(a.value(), f), "pow", {a},
                        [a, p](const Var& g) { return std::vector<Var>{g * pow(a, p - 1.0) * p}; });
}

Var abs(const Var& a) {
  Tensor sign = map1(a.value(), [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
  return make_op_result(map1(a.value(), [](double x) { return std::fabs(x); }), "abs", {a},
                        [sign = Var(std::move(sign))](const Var& g) {
                          return std::vector<Var>{g * sign};
                        });
}

// ---- reductions and shape ops ---------------------------------------------

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return make_op_result(Tensor::scalar(total), "sum", {a}, [shape = a.shape()](const Var& g) {
    return std::vector<Var>{broadcast_to(g, shape)};
  });
}

Var sum(const Var& a, std::size_t axis) {
  check_axis(a, axis, "sum");
  const Shape keep = keepdim_shape(a.shape(), axis);
  Tensor reduced = kernels::sum_to(a.value(), keep).reshaped(dropdim_shape(a.shape(), axis));
  return make_op_result(std::move(reduced), "sum_axis", {a},
                        [keep, shape = a.shape()](const Var& g) {
                          return std::vector<Var>{broadcast_to(reshape(g, keep), shape)};
                        });
}

Var mean(const Var& a) {
  if (a.numel() == 0) throw ShapeError("mean: empty tensor");
  return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Var mean(const Var& a, std::size_t axis) {
  check_axis(a, axis, "mean");
  return mul_scalar(sum(a, axis), 1.0 / static_cast<double>(a.shape()[axis]));
}

Var l1_norm(const Var& a) { return sum(abs(a)); }

Var l2_norm(const Var& a) { return sqrt(sum(square(a))); }

Var reshape(const Var& a, Shape shape) {
  return make_op_result(a.value().reshaped(std::move(shape)), "reshape", {a},
                        [orig = a.shape()](const Var& g) {
                          return std::vector<Var>{reshape(g, orig)};
                        });
}

Var broadcast_to(const Var& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  return make_op_result(kernels::broadcast_to(a.value(), shape), "broadcast_to", {a},
                        [orig = a.shape()](const Var& g) {
                          return std::vector<Var>{sum_to(g, orig)};
                        });
}

Var sum_to(const Var& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  return make_op_result(kernels::sum_to(a.value(), shape), "sum_to", {a},
                        [orig = a.shape()](const Var& g) {
                          return std::vector<Var>{broadcast_to(g, orig)};
                        });
}

Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end) {
  check_axis(a, axis, "slice");
  if (begin > end || end > a.shape()[axis]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for axis " + std::to_string(axis) + " of " + shape_str(a.shape()));
  }
  return make_op_result(slice_value(a.value(), axis, begin, end), "slice", {a},
                        [full = a.shape(), axis, begin](const Var& g) {
                          return std::vector<Var>{embed(g, full, axis, begin)};
                        });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Shape shape = parts[0].shape();
  if (axis >= shape.size()) throw ShapeError("concat: axis out of range for " + shape_str(shape));
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const Var& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size()) {
      throw ShapeError("concat: rank mismatch " + shape_str(shape) + " vs " + shape_str(s));
    }
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (k != axis && s[k] != shape[k]) {
        throw ShapeError("concat: shapes " + shape_str(shape) + " and " + shape_str(s) +
                         " differ off the concat axis");
      }
    }
    offsets.push_back(total);
    total += s[axis];
  }
  shape[axis] = total;
  auto [outer, inner] = outer_inner(shape, axis);
  std::vector<double> out;
  out.reserve(shape_numel(shape));
  for (std::size_t o = 0; o < outer; ++o) {
    for (const Var& p : parts) {
      const std::size_t chunk = p.shape()[axis] * inner;
      auto d = p.value().data();
      out.insert(out.end(), d.begin() + static_cast<std::ptrdiff_t>(o * chunk),
                 d.begin() + static_cast<std::ptrdiff_t>((o + 1) * chunk));
    }
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  std::vector<std::size_t> lengths;
  for (const Var& p : parts) lengths.push_back(p.shape()[axis]);
  return make_op_result(Tensor(std::move(shape), std::move(out)), "concat", std::move(parents),
                        [axis, offsets, lengths](const Var& g) {
                          std::vector<Var> grads;
                          for (std::size_t i = 0; i < offsets.size(); ++i) {
                            grads.push_back(slice(g, axis, offsets[i], offsets[i] + lengths[i]));
                          }
                          return grads;
                        });
}

// ---- backward pass --------------------------------------------------------

std::vector<Var> grad(const Var& output, std::span<const Var> wrt, bool create_graph) {
  if (output.numel() != 1) {
    throw ShapeError("grad: output must be a single value, got shape " + shape_str(output.shape()));
  }

  // Post-order DFS over the recorded graph.
  std::vector<const detail::Node*> order;
  std::unordered_set<const detail::Node*> visited;
  if (output.requires_grad()) {
    std::vector<std::pair<const detail::Node*, std::size_t>> stack{{output.node(), 0}};
    visited.insert(output.node());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        const detail::Node* parent = node->parents[next++].node();
        if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::unordered_map<const detail::Node*, Var> grads;
  grads.emplace(output.node(), Var(Tensor::full(output.shape(), 1.0)));

  {
    std::optional<NoGradGuard> guard;
    if (!create_graph) guard.emplace();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const detail::Node* node = *it;
      auto found = grads.find(node);
      if (found == grads.end() || !node->backward) continue;
      std::vector<Var> parent_grads = node->backward(found->second);
      for (std::size_t i = 0; i < node->parents.size(); ++i) {
        const Var& parent = node->parents[i];
        if (!parent.requires_grad()) continue;
        const Var& pg = parent_grads[i];
        if (!pg.value().all_finite()) {
          throw NumericError("grad: non-finite gradient produced by backward of '" +
                                 std::string(node->op) + "'",
                             NumericContext{.component = std::string(node->op)});
        }
        auto slot = grads.find(parent.node());
        if (slot == grads.end()) {
          grads.emplace(parent.node(), pg);
        } else {
          slot->second = add(slot->second, pg);
        }
      }
    }
  }

  std::vector<Var> result;
  result.reserve(wrt.size());
  for (const Var& w : wrt) {
    auto found = grads.find(w.node());
    if (found != grads.end()) {
      result.push_back(found->second);
    } else {
      result.emplace_back(Tensor::zeros(w.shape()));
    }
  }
  return result;
}

}  // namespace rankgan
