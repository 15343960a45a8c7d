#pragma once

#include "bdgd/ndgrad/tensor.hpp"
#include "bdgd/rng.hpp"

namespace bdgd::ndgrad {

/// 2-D cross-correlation, stride 1.
/// x: [N, C, H, W], weight: [O, C, k, k], bias: [O] or undefined.
/// Output: [N, O, H + 2p - k + 1, W + 2p - k + 1] with zero padding p.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int padding);

Tensor relu(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product of equally shaped tensors.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float factor);
Tensor add_scalar(const Tensor& x, float offset);
/// x times a one-element tensor s, broadcast over x.
Tensor mul_scalar(const Tensor& x, const Tensor& s);
/// Concatenation of [N, C1, H, W] and [N, C2, H, W] along channels.
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
/// log(1 + e^x), evaluated stably.
Tensor softplus(const Tensor& x);
/// Sum of all elements, shape [1].
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Inverted dropout: with train on, zeroes each element with probability
/// `rate` and scales survivors by 1/(1-rate); identity otherwise.
Tensor dropout(const Tensor& x, float rate, bool train, Rng& rng);

}  // namespace bdgd::ndgrad
