#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bdgd/model/cascade.hpp"
#include "bdgd/ndgrad/adam.hpp"
#include "bdgd/phantoms/dataset.hpp"

namespace bdgd::train {

struct TrainConfig {
  int blocks = 5;               // K
  int epochs_per_block = 30;
  int batch_size = 16;          // M
  ndgrad::AdamHyper adam;
  std::uint64_t seed = 1;
  /// Redraw D_{k-1} through the frozen blocks at every epoch instead of once per block.
  bool resample_each_epoch = false;
  /// Start log sigma_k^2 at the log mean squared error of the block's input
  /// (the maximum-likelihood value before training) instead of at 0.
  bool empirical_sigma2_init = true;

  void validate(std::size_t dataset_size) const;
  bool operator==(const TrainConfig&) const = default;
};

/// Inputs of block k for every training record: the iterate x_{k-1}, the
/// data-fidelity gradient there, and the targets.
struct BlockDataset {
  std::vector<Image> x_prev;
  std::vector<Image> grad;
  std::vector<Image> truth;
  std::vector<tomo::Sinogram> y;

  std::size_t size() const { return x_prev.size(); }
};

BlockDataset initial_block_dataset(const std::vector<phantoms::DatasetRecord>& records,
                                   const tomo::Geometry& geometry);

/// log of the per-pixel mean squared error between x_{k-1} and the truth.
double empirical_log_sigma2(const BlockDataset& data);

struct LossTerms {
  ndgrad::Tensor total;  // differentiable scalar
  double nll = 0.0;      // (N/M) * sum of per-record negative log-likelihoods
  double kl = 0.0;
};

/// One-sample minibatch estimate of the negative ELBO for the block:
///   (N/M) sum_i [ ||x_i - f(x_{k-1,i})||^2 / (2 sigma^2) + (P/2) log(2 pi sigma^2) ] + KL(q || N(0, I)),
/// with f drawn through the local reparameterization (mfvi) or dropout (mcdo).
LossTerms elbo_loss(const BlockDataset& data, std::span<const std::size_t> batch,
                    const model::BlockParams& block, const model::BlockConfig& config,
                    std::size_t dataset_size, Rng& rng);

struct BlockTrainResult {
  model::BlockParams params;
  std::vector<double> loss_trace;  // mean minibatch loss per epoch
};

/// Called at the start of each epoch; may replace the dataset (resampling).
using EpochHook = std::function<void(int epoch, BlockDataset& data)>;

/// Adam over shuffled minibatches for config.epochs_per_block epochs. Shuffles
/// and noise come from stream (seed, 4, k). Throws NumericalError on divergence.
BlockTrainResult train_block(int k, const BlockDataset& data, model::BlockParams init,
                             const model::BlockConfig& config, const TrainConfig& train_config,
                             const EpochHook& hook = {});

/// Advances every record through the trained block with one fixed parameter
/// draw per record (stream (seed, 3, k, i)) and recomputes the gradient.
BlockDataset propagate_dataset(const BlockDataset& data, const model::BlockParams& block,
                               const model::BlockConfig& config, const tomo::Geometry& geometry,
                               std::uint64_t seed, int k);

struct EpochRecord {
  int block = 0;
  int epoch = 0;
  double loss = 0.0;
  std::optional<double> validation_psnr;
};

struct TrainingReport {
  std::vector<EpochRecord> epochs;
};

struct GreedyOptions {
  /// Held-out records for per-block validation PSNR; may be empty.
  std::vector<phantoms::DatasetRecord> validation;
  /// Previously trained leading blocks to continue from.
  std::optional<model::Cascade> resume;
  /// Stored in the cascade; a resumed cascade must carry the same snapshot.
  std::string config_snapshot;
  /// After block k is trained and frozen.
  std::function<void(const model::Cascade&)> on_block;
  /// At the start of each epoch of block k, with the frozen blocks 1..k-1.
  std::function<void(int k, int epoch, const model::Cascade&)> on_epoch;
};

/// Trains K blocks one after another; earlier blocks stay frozen.
model::Cascade greedy_train(const std::vector<phantoms::DatasetRecord>& dataset,
                            const tomo::Geometry& geometry, const model::BlockConfig& config,
                            const TrainConfig& train_config, const GreedyOptions& options,
                            TrainingReport& report);

/// FNV-1a over the raw bytes of every parameter of the block.
std::uint64_t checksum(const model::BlockParams& block);

}  // namespace bdgd::train
