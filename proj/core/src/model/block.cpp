#include "bdgd/model/block.hpp"

#include <cmath>

#include "bdgd/errors.hpp"
#include "bdgd/ndgrad/ops.hpp"

namespace bdgd::model {

namespace ops = ndgrad;

BayesMode parse_bayes_mode(const std::string& name) {
  if (name == "mfvi") return BayesMode::mfvi;
  if (name == "mcdo") return BayesMode::mcdo;
  if (name == "deterministic" || name == "dgd") return BayesMode::deterministic;
  throw ConfigError("unknown mode '" + name + "' (expected mfvi, mcdo or deterministic)");
}

std::string to_string(BayesMode mode) {
  switch (mode) {
    case BayesMode::mfvi: return "mfvi";
    case BayesMode::mcdo: return "mcdo";
    case BayesMode::deterministic: return "deterministic";
  }
  return "?";
}

void BlockConfig::validate() const {
  if (branch_channels < 1 || merge_channels < 1 || feature_channels < 1)
    throw ConfigError("block config: channel widths must be positive");
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw ConfigError("block config: kernel_size must be a positive odd integer");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ConfigError("block config: dropout_rate must lie in [0, 1)");
  if (!std::isfinite(rho_init)) throw ConfigError("block config: rho_init must be finite");
}

BlockConfig BlockConfig::desk(BayesMode mode) {
  BlockConfig c;
  c.branch_channels = 8;
  c.merge_channels = 16;
  c.feature_channels = 8;
  c.mode = mode;
  return c;
}

BlockConfig BlockConfig::full_scale(BayesMode mode) {
  // The last layer is 16 -> 1 at 3x3 (145 weights); the remaining widths
  // give 32813 deterministic parameters per block.
  BlockConfig c;
  c.branch_channels = 47;
  c.merge_channels = 32;
  c.feature_channels = 16;
  c.mode = mode;
  return c;
}

std::vector<Tensor> BlockParams::trainable() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor>> BlockParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out{
      {"branch_image.weight", branch_image.weight},
      {"branch_image.bias", branch_image.bias},
      {"branch_gradient.weight", branch_gradient.weight},
      {"branch_gradient.bias", branch_gradient.bias},
      {"merge_in.weight", merge_in.weight},
      {"merge_in.bias", merge_in.bias},
      {"merge_out.weight", merge_out.weight},
      {"merge_out.bias", merge_out.bias},
      {"theta.mu.weight", theta.mu.weight},
      {"theta.mu.bias", theta.mu.bias},
  };
  if (theta.variational()) {
    out.emplace_back("theta.rho.weight", theta.rho.weight);
    out.emplace_back("theta.rho.bias", theta.rho.bias);
  }
  out.emplace_back("log_sigma2", log_sigma2);
  return out;
}

namespace {

Tensor fresh(const Tensor& t) {
  if (!t.defined()) return {};
  return Tensor::from(t.shape(), std::vector<float>(t.data().begin(), t.data().end()), true);
}

ConvParams fresh(const ConvParams& p) { return {fresh(p.weight), fresh(p.bias)}; }

ConvParams kaiming_conv(int out, int in, int k, double gain, Rng& rng) {
  const double std = std::sqrt(gain / (double(in) * k * k));
  std::vector<float> w(static_cast<std::size_t>(out) * in * k * k);
  for (auto& v : w) v = static_cast<float>(std * rng.normal());
  return {Tensor::from({out, in, k, k}, std::move(w), true), Tensor::zeros({out}, true)};
}

}  // namespace

BlockParams BlockParams::clone() const {
  BlockParams b;
  b.branch_image = fresh(branch_image);
  b.branch_gradient = fresh(branch_gradient);
  b.merge_in = fresh(merge_in);
  b.merge_out = fresh(merge_out);
  b.theta.mu = fresh(theta.mu);
  if (theta.variational()) b.theta.rho = fresh(theta.rho);
  b.log_sigma2 = fresh(log_sigma2);
  return b;
}

float BlockParams::sigma2() const { return std::exp(log_sigma2.item()); }

BlockParams init_block(const BlockConfig& config, Rng& rng) {
  config.validate();
  const int k = config.kernel_size;
  BlockParams b;
  b.branch_image = kaiming_conv(config.branch_channels, 1, k, 2.0, rng);
  b.branch_gradient = kaiming_conv(config.branch_channels, 1, k, 2.0, rng);
  b.merge_in = kaiming_conv(config.merge_channels, 2 * config.branch_channels, k, 2.0, rng);
  b.merge_out = kaiming_conv(config.feature_channels, config.merge_channels, k, 2.0, rng);
  // Linear output layer: unit gain.
  b.theta.mu = kaiming_conv(1, config.feature_channels, k, 1.0, rng);
  if (config.mode == BayesMode::mfvi) {
    const auto rho = static_cast<float>(config.rho_init);
    b.theta.rho = {Tensor::full(b.theta.mu.weight.shape(), rho, true), Tensor::full({1}, rho, true)};
  }
  b.log_sigma2 = Tensor::zeros({1}, true);
  return b;
}

Tensor block_features(const Tensor& x_prev, const Tensor& grad_d, const BlockParams& block,
                      const BlockConfig& config) {
  if (x_prev.shape() != grad_d.shape() || x_prev.rank() != 4 || x_prev.dim(1) != 1)
    throw ShapeError("block_features: expected matching [N, 1, H, W] inputs, got " +
                     ndgrad::to_string(x_prev.shape()) + " and " + ndgrad::to_string(grad_d.shape()));
  const int p = config.padding();
  auto a = ops::relu(ops::conv2d(x_prev, block.branch_image.weight, block.branch_image.bias, p));
  auto g = ops::relu(ops::conv2d(grad_d, block.branch_gradient.weight, block.branch_gradient.bias, p));
  auto h = ops::concat_channels(a, g);
  h = ops::relu(ops::conv2d(h, block.merge_in.weight, block.merge_in.bias, p));
  return ops::relu(ops::conv2d(h, block.merge_out.weight, block.merge_out.bias, p));
}

Tensor bayes_conv_lr(const Tensor& features, const VariationalConvParams& params, const Tensor& eps,
                     int padding) {
  if (!params.variational()) throw std::logic_error("bayes_conv_lr: parameters are not variational");
  auto mean = ops::conv2d(features, params.mu.weight, params.mu.bias, padding);
  auto var_w = ops::square(ops::softplus(params.rho.weight));
  auto var_b = ops::square(ops::softplus(params.rho.bias));
  auto var = ops::conv2d(ops::square(features), var_w, var_b, padding);
  if (eps.shape() != mean.shape())
    throw ShapeError("bayes_conv_lr: noise shape " + ndgrad::to_string(eps.shape()) +
                     " does not match output " + ndgrad::to_string(mean.shape()));
  return ops::add(mean, ops::mul(ops::sqrt(var), eps));
}

Tensor bayes_conv_lr(const Tensor& features, const VariationalConvParams& params, Rng& rng, int padding) {
  const auto& ws = params.mu.weight.shape();
  const std::int64_t h = features.dim(2) + 2 * padding - ws[2] + 1;
  const std::int64_t w = features.dim(3) + 2 * padding - ws[3] + 1;
  std::vector<float> eps(static_cast<std::size_t>(features.dim(0) * ws[0] * h * w));
  for (auto& e : eps) e = static_cast<float>(rng.normal());
  return bayes_conv_lr(features, params, Tensor::from({features.dim(0), ws[0], h, w}, std::move(eps)), padding);
}

namespace {

Tensor kl_term(const Tensor& mu, const Tensor& rho) {
  auto sigma = ops::softplus(rho);
  auto t = ops::add(ops::square(mu), ops::square(sigma));
  t = ops::sub(t, ops::scale(ops::log(sigma), 2.0f));
  return ops::scale(ops::add_scalar(t, -1.0f), 0.5f);
}

}  // namespace

Tensor kl_to_std_normal(const VariationalConvParams& params) {
  if (!params.variational()) throw std::logic_error("kl_to_std_normal: parameters are not variational");
  return ops::add(ops::sum(kl_term(params.mu.weight, params.rho.weight)),
                  ops::sum(kl_term(params.mu.bias, params.rho.bias)));
}

ConvParams sample_weights(const VariationalConvParams& params, Rng& rng) {
  auto draw = [&rng](const Tensor& mu, const Tensor& rho) {
    std::vector<float> out(static_cast<std::size_t>(mu.numel()));
    const auto m = mu.data(), r = rho.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double sigma = r[i] > 0.0f ? r[i] + std::log1p(std::exp(-double(r[i])))
                                       : std::log1p(std::exp(double(r[i])));
      out[i] = static_cast<float>(m[i] + sigma * rng.normal());
    }
    return Tensor::from(mu.shape(), std::move(out));
  };
  return {draw(params.mu.weight, params.rho.weight), draw(params.mu.bias, params.rho.bias)};
}

Tensor last_layer(const Tensor& features, const BlockParams& block, const BlockConfig& config, Rng& rng,
                  Sampling sampling) {
  const int p = config.padding();
  const auto& theta = block.theta;
  switch (config.mode) {
    case BayesMode::mfvi:
      if (sampling == Sampling::local_reparam) return bayes_conv_lr(features, theta, rng, p);
      if (sampling == Sampling::weight_draw) {
        const ConvParams w = sample_weights(theta, rng);
        return ops::conv2d(features, w.weight, w.bias, p);
      }
      return ops::conv2d(features, theta.mu.weight, theta.mu.bias, p);
    case BayesMode::mcdo: {
      const bool active = sampling != Sampling::mean;
      auto dropped = ops::dropout(features, static_cast<float>(config.dropout_rate), active, rng);
      return ops::conv2d(dropped, theta.mu.weight, theta.mu.bias, p);
    }
    case BayesMode::deterministic:
      return ops::conv2d(features, theta.mu.weight, theta.mu.bias, p);
  }
  throw std::logic_error("last_layer: unknown mode");
}

Tensor block_apply(const Tensor& x_prev, const Tensor& grad_d, const BlockParams& block,
                   const BlockConfig& config, Rng& rng, Sampling sampling) {
  auto features = block_features(x_prev, grad_d, block, config);
  auto delta = last_layer(features, block, config, rng, sampling);
  return ops::relu(ops::add(x_prev, delta));
}

Tensor images_to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) throw ShapeError("images_to_tensor: no images");
  const int h = images.front()->height, w = images.front()->width;
  std::vector<float> data;
  data.reserve(images.size() * static_cast<std::size_t>(h) * w);
  for (const Image* im : images) {
    if (im->height != h || im->width != w) throw ShapeError("images_to_tensor: images differ in size");
    data.insert(data.end(), im->values.begin(), im->values.end());
  }
  return Tensor::from({static_cast<std::int64_t>(images.size()), 1, h, w}, std::move(data));
}

Tensor image_to_tensor(const Image& image) { return images_to_tensor({&image}); }

std::vector<Image> tensor_to_images(const Tensor& t) {
  if (t.rank() != 4 || t.dim(1) != 1)
    throw ShapeError("tensor_to_images: expected [N, 1, H, W], got " + ndgrad::to_string(t.shape()));
  const int h = static_cast<int>(t.dim(2)), w = static_cast<int>(t.dim(3));
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<Image> out;
  const auto d = t.data();
  for (std::int64_t n = 0; n < t.dim(0); ++n)
    out.emplace_back(h, w, std::vector<float>(d.begin() + n * plane, d.begin() + (n + 1) * plane));
  return out;
}

}  // namespace bdgd::model
