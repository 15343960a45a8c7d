#include "conv_kernels.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

namespace bdgd::ndgrad::kernels {

namespace {

// Sixteen-lane vectors; GCC and Clang lower these to whatever the target has.
using v16 = float __attribute__((vector_size(64)));
constexpr std::int64_t kLanes = 16;
constexpr std::int64_t kTile = 2 * kLanes;  // output columns per register tile

inline v16 load(const float* p) {
  v16 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store(float* p, v16 v) { std::memcpy(p, &v, sizeof v); }

inline v16 splat(float s) { return v16{} + s; }

inline float reduce(v16 v) {
  float lanes[kLanes];
  store(lanes, v);
  for (std::int64_t w = kLanes / 2; w > 0; w /= 2)
    for (std::int64_t j = 0; j < w; ++j) lanes[j] += lanes[j + w];
  return lanes[0];
}

std::int64_t round_up(std::int64_t v, std::int64_t m) { return (v + m - 1) / m * m; }

/// Channel planes copied into a zero border: `pad` rows above, `pad` columns
/// to the left, and enough zeros on the right and below for full tiles.
struct Padded {
  std::vector<float> buf;
  std::int64_t rows = 0, stride = 0;

  const float* plane(std::int64_t c) const { return buf.data() + c * rows * stride; }
};

Padded make_padded(std::int64_t channels, std::int64_t rows, std::int64_t stride) {
  Padded p;
  p.rows = rows;
  p.stride = stride;
  p.buf.assign(static_cast<std::size_t>(channels * rows * stride), 0.0f);
  return p;
}

// Overwrites the interior only; the border stays zero between samples.
void fill_padded(Padded& p, const float* src, std::int64_t channels, std::int64_t h, std::int64_t w,
                 std::int64_t pad) {
  for (std::int64_t c = 0; c < channels; ++c)
    for (std::int64_t y = 0; y < h; ++y)
      std::memcpy(p.buf.data() + (c * p.rows + y + pad) * p.stride + pad, src + (c * h + y) * w, w * sizeof(float));
}

/// out[o][y][x] = bias[o] + sum_{c,ky,kx} w[o][c][ky][kx] * in[c][y + ky][x + kx] for
/// OB consecutive output channels, x over whole tiles of `out_stride` columns.
template <int OB>
void correlate_block(const Padded& in, std::int64_t in_channels, const float* w, std::int64_t k, const float* bias,
                     std::int64_t o0, std::int64_t out_rows, std::int64_t out_stride, float* out) {
  const std::int64_t kk = k * k;
  for (std::int64_t y = 0; y < out_rows; ++y) {
    for (std::int64_t x0 = 0; x0 < out_stride; x0 += kTile) {
      v16 acc[OB][2];
      for (int j = 0; j < OB; ++j) acc[j][0] = acc[j][1] = splat(bias ? bias[o0 + j] : 0.0f);
      for (std::int64_t c = 0; c < in_channels; ++c) {
        const float* plane = in.plane(c);
        for (std::int64_t ky = 0; ky < k; ++ky) {
          const float* row = plane + (y + ky) * in.stride + x0;
          for (std::int64_t kx = 0; kx < k; ++kx) {
            const v16 a0 = load(row + kx), a1 = load(row + kx + kLanes);
            for (int j = 0; j < OB; ++j) {
              const float wv = w[((o0 + j) * in_channels + c) * kk + ky * k + kx];
              acc[j][0] += wv * a0;
              acc[j][1] += wv * a1;
            }
          }
        }
      }
      for (int j = 0; j < OB; ++j) {
        float* dst = out + ((o0 + j) * out_rows + y) * out_stride + x0;
        store(dst, acc[j][0]);
        store(dst + kLanes, acc[j][1]);
      }
    }
  }
}

void correlate(const Padded& in, std::int64_t in_channels, const float* w, std::int64_t out_channels,
               std::int64_t k, const float* bias, std::int64_t out_rows, std::int64_t out_stride, float* out) {
  std::int64_t o = 0;
  for (; o + 4 <= out_channels; o += 4) correlate_block<4>(in, in_channels, w, k, bias, o, out_rows, out_stride, out);
  for (; o < out_channels; ++o) correlate_block<1>(in, in_channels, w, k, bias, o, out_rows, out_stride, out);
}

}  // namespace

float dot(const float* a, const float* b, std::int64_t n) {
  constexpr int kDotLanes = 16;
  float acc[kDotLanes] = {};
  std::int64_t i = 0;
  for (; i + kDotLanes <= n; i += kDotLanes)
    for (int j = 0; j < kDotLanes; ++j) acc[j] += a[i + j] * b[i + j];
  float tail = 0.0f;
  for (; i < n; ++i) tail += a[i] * b[i];
  for (int w = kDotLanes / 2; w > 0; w /= 2)
    for (int j = 0; j < w; ++j) acc[j] += acc[j + w];
  return acc[0] + tail;
}

void conv_forward(const ConvDims& d, const float* x, const float* w, const float* bias, float* out) {
  const std::int64_t k = d.kernel;
  const std::int64_t stride_out = round_up(d.out_width, kTile);
  const std::int64_t rows_in = std::max(d.height + 2 * d.padding, d.out_height + k - 1);
  const std::int64_t stride_in = stride_out + k - 1 + d.padding;
  const std::int64_t in_plane = d.height * d.width, out_plane = d.out_height * d.out_width;
  std::vector<float> scratch(static_cast<std::size_t>(d.out_channels * d.out_height * stride_out));
  Padded p = make_padded(d.in_channels, rows_in, std::max(stride_in, d.width + 2 * d.padding));
  for (std::int64_t n = 0; n < d.batch; ++n) {
    fill_padded(p, x + n * d.in_channels * in_plane, d.in_channels, d.height, d.width, d.padding);
    correlate(p, d.in_channels, w, d.out_channels, k, bias, d.out_height, stride_out, scratch.data());
    float* dst = out + n * d.out_channels * out_plane;
    for (std::int64_t o = 0; o < d.out_channels; ++o)
      for (std::int64_t y = 0; y < d.out_height; ++y)
        std::memcpy(dst + (o * d.out_height + y) * d.out_width, scratch.data() + (o * d.out_height + y) * stride_out,
                    d.out_width * sizeof(float));
  }
}

void conv_backward_input(const ConvDims& d, const float* grad_out, const float* w, float* grad_x) {
  // The input gradient is a correlation of the output gradient, padded by
  // k - 1 - p, with the spatially flipped and channel-transposed kernel.
  const std::int64_t k = d.kernel, kk = k * k;
  const std::int64_t q = k - 1 - d.padding;
  std::vector<float> flipped(static_cast<std::size_t>(d.out_channels * d.in_channels * kk));
  for (std::int64_t o = 0; o < d.out_channels; ++o)
    for (std::int64_t c = 0; c < d.in_channels; ++c)
      for (std::int64_t t = 0; t < kk; ++t)
        flipped[(c * d.out_channels + o) * kk + (kk - 1 - t)] = w[(o * d.in_channels + c) * kk + t];

  const std::int64_t stride_x = round_up(d.width, kTile);
  const std::int64_t rows_g = std::max(d.out_height + 2 * q, d.height + k - 1);
  const std::int64_t stride_g = std::max(stride_x + k - 1 + q, d.out_width + 2 * q);
  const std::int64_t in_plane = d.height * d.width, out_plane = d.out_height * d.out_width;
  std::vector<float> scratch(static_cast<std::size_t>(d.in_channels * d.height * stride_x));
  Padded g = make_padded(d.out_channels, rows_g, stride_g);
  for (std::int64_t n = 0; n < d.batch; ++n) {
    fill_padded(g, grad_out + n * d.out_channels * out_plane, d.out_channels, d.out_height, d.out_width, q);
    correlate(g, d.out_channels, flipped.data(), d.in_channels, k, nullptr, d.height, stride_x, scratch.data());
    float* dst = grad_x + n * d.in_channels * in_plane;
    for (std::int64_t c = 0; c < d.in_channels; ++c)
      for (std::int64_t y = 0; y < d.height; ++y) {
        float* drow = dst + (c * d.height + y) * d.width;
        const float* srow = scratch.data() + (c * d.height + y) * stride_x;
        for (std::int64_t i = 0; i < d.width; ++i) drow[i] += srow[i];
      }
  }
}

namespace {

/// Sum over samples and pixels of g[o][y][x] * in[c][y + ky][x + kx] for every
/// tap, accumulated lane-wise and reduced in a fixed order.
template <int K>
void weight_grad_fixed(const ConvDims& d, const float* grad_out, const float* x, float* grad_w) {
  constexpr std::int64_t kk = K * K;
  const std::int64_t stride_g = round_up(d.out_width, kLanes);
  const std::int64_t rows_in = std::max(d.height + 2 * d.padding, d.out_height + K - 1);
  const std::int64_t stride_in = std::max(stride_g + K - 1, d.width + 2 * d.padding);
  const std::int64_t in_plane = d.height * d.width, out_plane = d.out_height * d.out_width;

  std::vector<v16> acc(static_cast<std::size_t>(d.out_channels * d.in_channels * kk), v16{});
  Padded p = make_padded(d.in_channels, rows_in, stride_in);
  Padded g = make_padded(d.out_channels, d.out_height, stride_g);
  for (std::int64_t n = 0; n < d.batch; ++n) {
    fill_padded(p, x + n * d.in_channels * in_plane, d.in_channels, d.height, d.width, d.padding);
    fill_padded(g, grad_out + n * d.out_channels * out_plane, d.out_channels, d.out_height, d.out_width, 0);
    for (std::int64_t o = 0; o < d.out_channels; ++o) {
      const float* gplane = g.plane(o);
      for (std::int64_t c = 0; c < d.in_channels; ++c) {
        const float* plane = p.plane(c);
        v16 a[kk];
        for (auto& v : a) v = v16{};
        for (std::int64_t y = 0; y < d.out_height; ++y)
          for (std::int64_t x0 = 0; x0 < stride_g; x0 += kLanes) {
            const v16 gv = load(gplane + y * stride_g + x0);
            for (int ky = 0; ky < K; ++ky) {
              const float* row = plane + (y + ky) * stride_in + x0;
              for (int kx = 0; kx < K; ++kx) a[ky * K + kx] += gv * load(row + kx);
            }
          }
        v16* dst = acc.data() + (o * d.in_channels + c) * kk;
        for (std::int64_t t = 0; t < kk; ++t) dst[t] += a[t];
      }
    }
  }
  for (std::size_t i = 0; i < acc.size(); ++i) grad_w[i] += reduce(acc[i]);
}

// Any kernel size; used for sizes without a specialization.
void weight_grad_generic(const ConvDims& d, const float* grad_out, const float* x, float* grad_w) {
  const std::int64_t in_plane = d.height * d.width;
  const std::int64_t out_plane = d.out_height * d.out_width;
  const std::int64_t k = d.kernel;
  for (std::int64_t n = 0; n < d.batch; ++n)
    for (std::int64_t o = 0; o < d.out_channels; ++o) {
      const float* g = grad_out + (n * d.out_channels + o) * out_plane;
      for (std::int64_t c = 0; c < d.in_channels; ++c) {
        const float* src = x + (n * d.in_channels + c) * in_plane;
        float* gw = grad_w + (o * d.in_channels + c) * k * k;
        for (std::int64_t ky = 0; ky < k; ++ky) {
          const std::int64_t oy_lo = std::max<std::int64_t>(0, d.padding - ky);
          const std::int64_t oy_hi = std::min<std::int64_t>(d.out_height, d.height + d.padding - ky);
          for (std::int64_t kx = 0; kx < k; ++kx) {
            const std::int64_t ox_lo = std::max<std::int64_t>(0, d.padding - kx);
            const std::int64_t ox_hi = std::min<std::int64_t>(d.out_width, d.width + d.padding - kx);
            if (ox_hi <= ox_lo) continue;
            const std::int64_t shift = kx - d.padding;
            float acc = 0.0f;
            for (std::int64_t oy = oy_lo; oy < oy_hi; ++oy)
              acc += dot(g + oy * d.out_width + ox_lo, src + (oy + ky - d.padding) * d.width + ox_lo + shift,
                         ox_hi - ox_lo);
            gw[ky * k + kx] += acc;
          }
        }
      }
    }
}

}  // namespace

void conv_backward_weight(const ConvDims& d, const float* grad_out, const float* x, float* grad_w) {
  switch (d.kernel) {
    case 1: return weight_grad_fixed<1>(d, grad_out, x, grad_w);
    case 3: return weight_grad_fixed<3>(d, grad_out, x, grad_w);
    case 5: return weight_grad_fixed<5>(d, grad_out, x, grad_w);
    default: return weight_grad_generic(d, grad_out, x, grad_w);
  }
}

void conv_backward_bias(const ConvDims& d, const float* grad_out, float* grad_b) {
  const std::int64_t out_plane = d.out_height * d.out_width;
  for (std::int64_t n = 0; n < d.batch; ++n)
    for (std::int64_t o = 0; o < d.out_channels; ++o) {
      const float* g = grad_out + (n * d.out_channels + o) * out_plane;
      float acc = 0.0f;
      for (std::int64_t i = 0; i < out_plane; ++i) acc += g[i];
      grad_b[o] += acc;
    }
}

}  // namespace bdgd::ndgrad::kernels
