#include <cmath>
#include <cstring>
#include <numeric>

#include "bdgd/errors.hpp"
#include "bdgd/infer/infer.hpp"
#include "bdgd/ndgrad/adam.hpp"
#include "bdgd/tomo/radon.hpp"
#include "bdgd/train/train.hpp"

namespace bdgd::train {

using model::BlockParams;
using model::Cascade;

BlockDataset initial_block_dataset(const std::vector<phantoms::DatasetRecord>& records,
                                   const tomo::Geometry& geometry) {
  BlockDataset d;
  d.x_prev.reserve(records.size());
  for (const auto& r : records) {
    tomo::require_image(r.x0, geometry, "initial_block_dataset");
    d.x_prev.push_back(r.x0);
    d.grad.push_back(tomo::grad_data_fidelity(r.x0, r.sinogram, geometry));
    d.truth.push_back(r.ground_truth);
    d.y.push_back(r.sinogram);
  }
  return d;
}

double empirical_log_sigma2(const BlockDataset& data) {
  double ss = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t p = 0; p < data.x_prev[i].size(); ++p) {
      const double d = double(data.x_prev[i].values[p]) - data.truth[i].values[p];
      ss += d * d;
    }
    n += data.x_prev[i].size();
  }
  if (n == 0 || !(ss > 0.0)) throw DataError("empirical_log_sigma2: inputs already equal the targets");
  return std::log(ss / static_cast<double>(n));
}

BlockTrainResult train_block(int k, const BlockDataset& data, BlockParams init, const model::BlockConfig& config,
                             const TrainConfig& train_config, const EpochHook& hook) {
  train_config.validate(data.size());
  Rng rng = Rng::derive(train_config.seed, {4, static_cast<std::uint64_t>(k)});
  BlockDataset resampled;
  const BlockDataset* current = &data;

  BlockTrainResult result{std::move(init), {}};
  auto params = result.params.trainable();
  ndgrad::AdamState state(params, train_config.adam);

  const std::size_t n = data.size();
  const auto m = static_cast<std::size_t>(train_config.batch_size);
  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < train_config.epochs_per_block; ++epoch) {
    if (hook) {
      resampled = data;
      hook(epoch, resampled);
      if (resampled.size() != n) throw std::logic_error("train_block: epoch hook changed the dataset size");
      current = &resampled;
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double total = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < n; start += m) {
      const std::size_t len = std::min(m, n - start);
      std::span<const std::size_t> batch(order.data() + start, len);
      LossTerms loss = elbo_loss(*current, batch, result.params, config, n, rng);
      loss.total.backward();
      ndgrad::adam_step(params, state);
      total += loss.total.item();
      ++batches;
    }
    const double mean = total / batches;
    if (!std::isfinite(mean))
      throw NumericalError("block " + std::to_string(k) + " diverged at epoch " + std::to_string(epoch));
    for (const auto& p : params)
      for (float v : p.data())
        if (!std::isfinite(v))
          throw NumericalError("block " + std::to_string(k) + ": non-finite parameter after epoch " +
                               std::to_string(epoch));
    result.loss_trace.push_back(mean);
  }
  return result;
}

namespace {

void advance(BlockDataset& d, std::size_t i, const BlockParams& block, const model::BlockConfig& config,
             const tomo::Geometry& geometry, Rng& rng) {
  d.x_prev[i] = model::block_step(d.x_prev[i], d.y[i], block, config, geometry, rng, model::Sampling::weight_draw);
  d.grad[i] = tomo::grad_data_fidelity(d.x_prev[i], d.y[i], geometry);
}

}  // namespace

BlockDataset propagate_dataset(const BlockDataset& data, const BlockParams& block, const model::BlockConfig& config,
                               const tomo::Geometry& geometry, std::uint64_t seed, int k) {
  BlockDataset out = data;
  for (std::size_t i = 0; i < out.size(); ++i) {
    Rng rng = Rng::derive(seed, {3, static_cast<std::uint64_t>(k), i});
    advance(out, i, block, config, geometry, rng);
  }
  return out;
}

namespace {

double validation_psnr(const Cascade& cascade, const std::vector<phantoms::DatasetRecord>& records) {
  double total = 0.0;
  Rng unused(0);
  for (const auto& r : records) {
    const auto xs = model::cascade_forward(r.sinogram, r.x0, cascade, unused, model::Sampling::mean);
    total += infer::psnr(xs.back(), r.ground_truth);
  }
  return total / static_cast<double>(records.size());
}

void require_compatible(const Cascade& resume, const tomo::Geometry& geometry, const model::BlockConfig& config,
                        const std::string& snapshot, int blocks) {
  if (!(resume.geometry == geometry)) throw ConfigError("resume: checkpoint geometry differs from the dataset");
  if (!(resume.config == config)) throw ConfigError("resume: checkpoint block config differs from the run config");
  if (!snapshot.empty() && !resume.config_snapshot.empty() && resume.config_snapshot != snapshot)
    throw ConfigError("resume: checkpoint was written with a different configuration");
  if (resume.depth() > static_cast<std::size_t>(blocks))
    throw ConfigError("resume: checkpoint has " + std::to_string(resume.depth()) + " blocks, run asks for " +
                      std::to_string(blocks));
}

}  // namespace

Cascade greedy_train(const std::vector<phantoms::DatasetRecord>& dataset, const tomo::Geometry& geometry,
                     const model::BlockConfig& config, const TrainConfig& train_config, const GreedyOptions& options,
                     TrainingReport& report) {
  config.validate();
  train_config.validate(dataset.size());
  if (dataset.empty()) throw DataError("greedy_train: empty training set");

  const BlockDataset initial = initial_block_dataset(dataset, geometry);
  BlockDataset data = initial;
  Cascade cascade{{}, geometry, config, options.config_snapshot};

  if (options.resume) {
    require_compatible(*options.resume, geometry, config, options.config_snapshot, train_config.blocks);
    // Replaying the propagation with the same streams reproduces D_k exactly.
    for (const auto& block : options.resume->blocks) {
      cascade.blocks.push_back(block.clone());
      const int k = static_cast<int>(cascade.depth());
      data = propagate_dataset(data, cascade.blocks.back(), config, geometry, train_config.seed, k);
    }
  }

  for (int k = static_cast<int>(cascade.depth()) + 1; k <= train_config.blocks; ++k) {
    Rng init_rng = Rng::derive(train_config.seed, {6, static_cast<std::uint64_t>(k)});
    BlockParams init = model::init_block(config, init_rng);
    if (train_config.empirical_sigma2_init)
      init.log_sigma2.mutable_data()[0] = static_cast<float>(empirical_log_sigma2(data));

    EpochHook hook;
    if (train_config.resample_each_epoch || options.on_epoch) {
      hook = [&, k](int epoch, BlockDataset& d) {
        if (options.on_epoch) options.on_epoch(k, epoch, cascade);
        if (!train_config.resample_each_epoch || epoch == 0) return;
        // Fresh draws of D_{k-1} through the frozen blocks.
        d = initial;
        for (std::size_t i = 0; i < d.size(); ++i) {
          Rng rng = Rng::derive(train_config.seed,
                                {5, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(epoch), i});
          for (const auto& block : cascade.blocks) advance(d, i, block, config, geometry, rng);
        }
      };
    }

    BlockTrainResult trained = train_block(k, data, std::move(init), config, train_config, hook);
    cascade.blocks.push_back(trained.params.clone());

    for (std::size_t e = 0; e < trained.loss_trace.size(); ++e)
      report.epochs.push_back({k, static_cast<int>(e), trained.loss_trace[e], std::nullopt});
    if (!options.validation.empty()) {
      const double v = validation_psnr(cascade, options.validation);
      if (trained.loss_trace.empty())
        report.epochs.push_back({k, -1, std::nan(""), v});
      else
        report.epochs.back().validation_psnr = v;
    }

    if (k < train_config.blocks)
      data = propagate_dataset(data, cascade.blocks.back(), config, geometry, train_config.seed, k);
    if (options.on_block) options.on_block(cascade);
  }
  return cascade;
}

std::uint64_t checksum(const BlockParams& block) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [name, t] : block.named()) {
    for (float v : t.data()) {
      unsigned char bytes[sizeof(float)];
      std::memcpy(bytes, &v, sizeof v);
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
      }
    }
  }
  return h;
}

}  // namespace bdgd::train
