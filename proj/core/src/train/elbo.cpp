#include <cmath>
#include <numbers>

#include "bdgd/errors.hpp"
#include "bdgd/ndgrad/ops.hpp"
#include "bdgd/train/train.hpp"

namespace bdgd::train {

namespace ops = ndgrad;
using model::BayesMode;

void TrainConfig::validate(std::size_t dataset_size) const {
  if (blocks < 1) throw ConfigError("train config: blocks (K) must be >= 1");
  if (epochs_per_block < 0) throw ConfigError("train config: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (dataset_size > 0 && static_cast<std::size_t>(batch_size) > dataset_size)
    throw ConfigError("train config: batch_size " + std::to_string(batch_size) +
                      " exceeds dataset size " + std::to_string(dataset_size));
  if (!(adam.lr > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.eps > 0.0))
    throw ConfigError("train config: invalid Adam hyperparameters");
}

LossTerms elbo_loss(const BlockDataset& data, std::span<const std::size_t> batch,
                    const model::BlockParams& block, const model::BlockConfig& config,
                    std::size_t dataset_size, Rng& rng) {
  if (batch.empty()) throw ConfigError("elbo_loss: empty batch");
  std::vector<const Image*> xs, gs, ts;
  for (std::size_t i : batch) {
    if (i >= data.size()) throw ShapeError("elbo_loss: record index out of range");
    xs.push_back(&data.x_prev[i]);
    gs.push_back(&data.grad[i]);
    ts.push_back(&data.truth[i]);
  }
  const auto x_prev = model::images_to_tensor(xs);
  const auto grad = model::images_to_tensor(gs);
  const auto truth = model::images_to_tensor(ts);

  const auto prediction = model::block_apply(x_prev, grad, block, config, rng, model::Sampling::local_reparam);
  const auto squared_error = ops::sum(ops::square(ops::sub(prediction, truth)));

  const double m = static_cast<double>(batch.size());
  const double pixels = static_cast<double>(data.x_prev[batch.front()].size());
  const auto& log_sigma2 = block.log_sigma2;
  auto fit = ops::scale(ops::mul_scalar(squared_error, ops::exp(ops::scale(log_sigma2, -1.0f))), 0.5f);
  auto normalizer = ops::scale(ops::add_scalar(log_sigma2, static_cast<float>(std::log(2.0 * std::numbers::pi))),
                               static_cast<float>(0.5 * m * pixels));
  auto nll = ops::scale(ops::add(fit, normalizer), static_cast<float>(double(dataset_size) / m));

  LossTerms out;
  out.nll = nll.item();
  if (config.mode == BayesMode::mfvi) {
    auto kl = model::kl_to_std_normal(block.theta);
    out.kl = kl.item();
    out.total = ops::add(nll, kl);
  } else {
    out.total = nll;
  }
  if (!std::isfinite(out.total.item())) throw NumericalError("elbo_loss: non-finite loss");
  return out;
}

}  // namespace bdgd::train
