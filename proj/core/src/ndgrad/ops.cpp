#include "bdgd/ndgrad/ops.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>

#include "bdgd/errors.hpp"
#include "conv_kernels.hpp"

namespace bdgd::ndgrad {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

void check_finite(const char* op, const std::vector<float>& values) {
  // Branch-free scan over the exponent bits so the loop vectorizes.
  std::uint32_t bad = 0;
  for (float v : values) bad |= (std::bit_cast<std::uint32_t>(v) & 0x7f800000u) == 0x7f800000u;
  if (bad) throw NumericalError(std::string(op) + ": produced a non-finite value");
}

// Builds the output node of `op`. The backward closure is attached only when
// some input takes part in differentiation.
Tensor make_result(const char* op, Shape shape, std::vector<float> values,
                   std::vector<NodePtr> inputs, std::function<void(Node&)> backward) {
  check_finite(op, values);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->op = op;
  bool needs_grad = false;
  for (const auto& in : inputs) needs_grad = needs_grad || in->requires_grad;
  if (needs_grad) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return Tensor::wrap(std::move(node));
}

// dst += factor * g, or factor * g * m elementwise when m is given.
void accumulate_grad(std::vector<float>& dst, const std::vector<float>& g, const float* m = nullptr,
                float factor = 1.0f) {
  float* __restrict d = dst.data();
  const float* __restrict gv = g.data();
  const std::size_t n = dst.size();
  if (m) {
    const float* __restrict mv = m;
    for (std::size_t i = 0; i < n; ++i) d[i] += factor * (gv[i] * mv[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) d[i] += factor * gv[i];
  }
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
}

// Elementwise unary op given value f(x) and derivative df(x, y).
template <typename F, typename DF>
Tensor unary(const char* op, const Tensor& x, F f, DF df) {
  const auto in = x.data();
  std::vector<float> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  NodePtr xin = x.node_ptr();
  return make_result(op, x.shape(), std::move(out), {xin}, [xin, df](Node& self) {
    if (!xin->requires_grad) return;
    float* __restrict gx = xin->grad_buffer().data();
    const float* __restrict g = self.grad.data();
    const float* __restrict xv = xin->data.data();
    const float* __restrict yv = self.data.data();
    const std::size_t n = self.data.size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * df(xv[i], yv[i]);
  });
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int padding) {
  if (x.rank() != 4 || weight.rank() != 4)
    throw ShapeError("conv2d: expected 4-d input and weight, got " + to_string(x.shape()) + " and " +
                     to_string(weight.shape()));
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  if (ws[1] != xs[1] || ws[2] != ws[3])
    throw ShapeError("conv2d: input " + to_string(xs) + " incompatible with weight " + to_string(ws));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != ws[0]))
    throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " incompatible with weight " +
                     to_string(ws));
  if (padding < 0) throw ShapeError("conv2d: negative padding");
  kernels::ConvDims d{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], padding, 0, 0};
  d.out_height = d.height + 2 * padding - d.kernel + 1;
  d.out_width = d.width + 2 * padding - d.kernel + 1;
  if (d.out_height <= 0 || d.out_width <= 0)
    throw ShapeError("conv2d: kernel " + to_string(ws) + " larger than padded input " + to_string(xs));

  std::vector<float> out(static_cast<std::size_t>(d.batch * d.out_channels * d.out_height * d.out_width));
  kernels::conv_forward(d, x.data().data(), weight.data().data(),
                        bias.defined() ? bias.data().data() : nullptr, out.data());

  NodePtr xn = x.node_ptr(), wn = weight.node_ptr(), bn = bias.defined() ? bias.node_ptr() : nullptr;
  std::vector<NodePtr> inputs{xn, wn};
  if (bn) inputs.push_back(bn);
  return make_result("conv2d", {d.batch, d.out_channels, d.out_height, d.out_width}, std::move(out),
                     std::move(inputs), [d, xn, wn, bn](Node& self) {
                       if (xn->requires_grad)
                         kernels::conv_backward_input(d, self.grad.data(), wn->data.data(),
                                                      xn->grad_buffer().data());
                       if (wn->requires_grad)
                         kernels::conv_backward_weight(d, self.grad.data(), xn->data.data(),
                                                       wn->grad_buffer().data());
                       if (bn && bn->requires_grad)
                         kernels::conv_backward_bias(d, self.grad.data(), bn->grad_buffer().data());
                     });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](float v) { return v > 0.0f ? v : 0.0f; },
      [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](float v) { return v * v; }, [](float v, float) { return 2.0f * v; });
}

Tensor sqrt(const Tensor& x) {
  for (float v : x.data())
    if (v < 0.0f) throw NumericalError("sqrt: negative input");
  return unary(
      "sqrt", x, [](float v) { return std::sqrt(v); }, [](float, float y) { return 0.5f / y; });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](float v) { return std::exp(v); }, [](float, float y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      "log", x, [](float v) { return std::log(v); }, [](float v, float) { return 1.0f / v; });
}

Tensor softplus(const Tensor& x) {
  return unary(
      "softplus", x,
      [](float v) { return v > 0.0f ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](float v, float) { return 1.0f / (1.0f + std::exp(-v)); });
}

Tensor scale(const Tensor& x, float factor) {
  return unary(
      "scale", x, [factor](float v) { return factor * v; }, [factor](float, float) { return factor; });
}

Tensor add_scalar(const Tensor& x, float offset) {
  return unary(
      "add_scalar", x, [offset](float v) { return v + offset; }, [](float, float) { return 1.0f; });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  const auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  NodePtr an = a.node_ptr(), bn = b.node_ptr();
  return make_result("add", a.shape(), std::move(out), {an, bn}, [an, bn](Node& self) {
    for (const auto& in : {an, bn}) {
      if (!in->requires_grad) continue;
      accumulate_grad(in->grad_buffer(), self.grad);
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  const auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  NodePtr an = a.node_ptr(), bn = b.node_ptr();
  return make_result("sub", a.shape(), std::move(out), {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) {
      accumulate_grad(an->grad_buffer(), self.grad);
    }
    if (bn->requires_grad) {
      accumulate_grad(bn->grad_buffer(), self.grad, nullptr, -1.0f);
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  const auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  NodePtr an = a.node_ptr(), bn = b.node_ptr();
  return make_result("mul", a.shape(), std::move(out), {an, bn}, [an, bn](Node& self) {
    if (an->requires_grad) {
      accumulate_grad(an->grad_buffer(), self.grad, bn->data.data());
    }
    if (bn->requires_grad) {
      accumulate_grad(bn->grad_buffer(), self.grad, an->data.data());
    }
  });
}

Tensor mul_scalar(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1)
    throw ShapeError("mul_scalar: factor must have one element, got shape " + to_string(s.shape()));
  const float f = s.data()[0];
  const auto in = x.data();
  std::vector<float> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * f;
  NodePtr xn = x.node_ptr(), sn = s.node_ptr();
  return make_result("mul_scalar", x.shape(), std::move(out), {xn, sn}, [xn, sn](Node& self) {
    if (xn->requires_grad) {
      accumulate_grad(xn->grad_buffer(), self.grad, nullptr, sn->data[0]);
    }
    if (sn->requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += double(self.grad[i]) * xn->data[i];
      sn->grad_buffer()[0] += static_cast<float>(acc);
    }
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) ||
      a.dim(3) != b.dim(3))
    throw ShapeError("concat_channels: incompatible shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  const std::int64_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  const std::int64_t plane = a.dim(2) * a.dim(3);
  std::vector<float> out(static_cast<std::size_t>(n * (ca + cb) * plane));
  const auto x = a.data(), y = b.data();
  for (std::int64_t i = 0; i < n; ++i) {
    std::copy_n(x.begin() + i * ca * plane, ca * plane, out.begin() + i * (ca + cb) * plane);
    std::copy_n(y.begin() + i * cb * plane, cb * plane, out.begin() + (i * (ca + cb) + ca) * plane);
  }
  NodePtr an = a.node_ptr(), bn = b.node_ptr();
  return make_result("concat_channels", {n, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {an, bn},
                     [an, bn, n, ca, cb, plane](Node& self) {
                       for (std::int64_t i = 0; i < n; ++i) {
                         const float* g = self.grad.data() + i * (ca + cb) * plane;
                         if (an->requires_grad) {
                           float* d = an->grad_buffer().data() + i * ca * plane;
                           for (std::int64_t j = 0; j < ca * plane; ++j) d[j] += g[j];
                         }
                         if (bn->requires_grad) {
                           float* d = bn->grad_buffer().data() + i * cb * plane;
                           for (std::int64_t j = 0; j < cb * plane; ++j) d[j] += g[ca * plane + j];
                         }
                       }
                     });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  NodePtr xn = x.node_ptr();
  return make_result("sum", {1}, {static_cast<float>(acc)}, {xn}, [xn](Node& self) {
    auto& g = xn->grad_buffer();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(x), 1.0f / static_cast<float>(x.numel()));
}

Tensor dropout(const Tensor& x, float rate, bool train, Rng& rng) {
  if (rate < 0.0f || rate >= 1.0f) throw std::invalid_argument("dropout: rate must lie in [0, 1)");
  if (!train || rate == 0.0f) return scale(x, 1.0f);
  const float keep_scale = 1.0f / (1.0f - rate);
  auto mask = std::make_shared<std::vector<float>>(static_cast<std::size_t>(x.numel()));
  for (auto& m : *mask) m = rng.bernoulli(rate) ? 0.0f : keep_scale;
  const auto in = x.data();
  std::vector<float> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * (*mask)[i];
  NodePtr xn = x.node_ptr();
  return make_result("dropout", x.shape(), std::move(out), {xn}, [xn, mask](Node& self) {
    accumulate_grad(xn->grad_buffer(), self.grad, mask->data());
  });
}

}  // namespace bdgd::ndgrad
