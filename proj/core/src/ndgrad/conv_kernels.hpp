#pragma once

// Stride-1 convolution kernels on NCHW float buffers. Inputs are copied into
// zero-bordered planes and processed in register tiles of output columns;
// every sum runs in a fixed order, so results are bit-reproducible.

#include <cstdint>

namespace bdgd::ndgrad::kernels {

struct ConvDims {
  std::int64_t batch, in_channels, height, width;
  std::int64_t out_channels, kernel;
  std::int64_t padding;
  std::int64_t out_height, out_width;
};

void conv_forward(const ConvDims& d, const float* x, const float* w, const float* bias, float* out);
void conv_backward_input(const ConvDims& d, const float* grad_out, const float* w, float* grad_x);
void conv_backward_weight(const ConvDims& d, const float* grad_out, const float* x, float* grad_w);
void conv_backward_bias(const ConvDims& d, const float* grad_out, float* grad_b);

float dot(const float* a, const float* b, std::int64_t n);

}  // namespace bdgd::ndgrad::kernels
