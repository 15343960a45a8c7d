#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bdgd/image.hpp"
#include "bdgd/ndgrad/tensor.hpp"
#include "bdgd/rng.hpp"

namespace bdgd::model {

using ndgrad::Tensor;

/// How the last layer of each block is treated.
enum class BayesMode {
  mfvi,           // mean-field Gaussian weights, local reparameterization in training
  mcdo,           // Monte Carlo dropout on the last layer's input
  deterministic,  // plain convolution (the non-Bayesian cascade)
};

BayesMode parse_bayes_mode(const std::string& name);
std::string to_string(BayesMode mode);

/// Widths of one block: two branches (image, data-fidelity gradient), a
/// concatenation, two merge convolutions, and the last layer to one channel.
struct BlockConfig {
  int branch_channels = 8;
  int merge_channels = 16;
  int feature_channels = 8;  // input width of the last layer
  int kernel_size = 3;
  BayesMode mode = BayesMode::mfvi;
  double dropout_rate = 0.1;
  double rho_init = -4.0;

  int padding() const { return (kernel_size - 1) / 2; }
  void validate() const;
  bool operator==(const BlockConfig&) const = default;

  /// Small widths used for CPU-scale experiments.
  static BlockConfig desk(BayesMode mode = BayesMode::mfvi);
  /// Large widths (about 32.8k parameters per block) for full-scale training.
  static BlockConfig full_scale(BayesMode mode = BayesMode::mfvi);
};

struct ConvParams {
  Tensor weight;  // [out, in, k, k]
  Tensor bias;    // [out]

  std::int64_t count() const { return weight.numel() + bias.numel(); }
};

/// Mean-field Gaussian over a convolution's weights and bias, with
/// sigma = softplus(rho). For non-variational modes rho is left undefined and
/// mu holds the plain weights.
struct VariationalConvParams {
  ConvParams mu;
  ConvParams rho;

  bool variational() const { return rho.weight.defined(); }
};

struct BlockParams {
  // Deterministic part (phi).
  ConvParams branch_image;
  ConvParams branch_gradient;
  ConvParams merge_in;
  ConvParams merge_out;
  // Last layer (theta).
  VariationalConvParams theta;
  // Observation log-variance log sigma_k^2, shape [1].
  Tensor log_sigma2;

  /// Every trainable tensor, in a fixed order.
  std::vector<Tensor> trainable() const;
  /// Trainable tensors with stable names ("branch_image.weight", ...).
  std::vector<std::pair<std::string, Tensor>> named() const;
  /// Deep copy with fresh storage, still marked trainable.
  BlockParams clone() const;
  float sigma2() const;
};

BlockParams init_block(const BlockConfig& config, Rng& rng);

/// Sampling behaviour of the last layer.
enum class Sampling {
  mean,           // posterior-mean weights, no dropout, no noise
  local_reparam,  // pre-activation noise (mfvi), dropout (mcdo)
  weight_draw,    // one weight sample shared by the whole batch (mfvi), dropout (mcdo)
};

/// Branch convs + ReLU on x_prev and grad_d, channel concatenation, then two
/// conv + ReLU merge layers. Inputs are [N, 1, H, W]; output [N, feature_channels, H, W].
Tensor block_features(const Tensor& x_prev, const Tensor& grad_d, const BlockParams& block,
                      const BlockConfig& config);

/// Mean and variance of the pre-activations, then m + sqrt(v) * eps.
/// eps has the output shape [N, 1, H, W].
Tensor bayes_conv_lr(const Tensor& features, const VariationalConvParams& params, const Tensor& eps,
                     int padding);
Tensor bayes_conv_lr(const Tensor& features, const VariationalConvParams& params, Rng& rng, int padding);

/// KL( N(mu, softplus(rho)^2) || N(0, I) ), summed over weights and bias.
Tensor kl_to_std_normal(const VariationalConvParams& params);

/// One weight sample mu + softplus(rho) * eps, detached from the graph.
ConvParams sample_weights(const VariationalConvParams& params, Rng& rng);

/// The update delta produced by the last layer.
Tensor last_layer(const Tensor& features, const BlockParams& block, const BlockConfig& config,
                  Rng& rng, Sampling sampling);

/// x_next = relu(x_prev + delta): one learned gradient step followed by the
/// projection onto non-negative images.
Tensor block_apply(const Tensor& x_prev, const Tensor& grad_d, const BlockParams& block,
                   const BlockConfig& config, Rng& rng, Sampling sampling);

/// Stacks equally sized images into a [N, 1, H, W] tensor.
Tensor images_to_tensor(const std::vector<const Image*>& images);
Tensor image_to_tensor(const Image& image);
std::vector<Image> tensor_to_images(const Tensor& t);

}  // namespace bdgd::model
