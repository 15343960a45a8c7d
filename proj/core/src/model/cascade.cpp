#include "bdgd/model/cascade.hpp"

#include "bdgd/errors.hpp"
#include "bdgd/tomo/radon.hpp"

namespace bdgd::model {

float Cascade::final_sigma2() const { return blocks.empty() ? 1.0f : blocks.back().sigma2(); }

Image block_step(const Image& x_prev, const tomo::Sinogram& y, const BlockParams& block,
                 const BlockConfig& config, const tomo::Geometry& geometry, Rng& rng, Sampling sampling) {
  const Image grad = tomo::grad_data_fidelity(x_prev, y, geometry);
  auto next = block_apply(image_to_tensor(x_prev), image_to_tensor(grad), block, config, rng, sampling);
  return std::move(tensor_to_images(next).front());
}

std::vector<Image> cascade_forward(const tomo::Sinogram& y, const Image& x0, const Cascade& cascade,
                                   Rng& rng, Sampling sampling) {
  tomo::require_image(x0, cascade.geometry, "cascade_forward");
  tomo::require_sinogram(y, cascade.geometry, "cascade_forward");
  std::vector<Image> iterates{x0};
  iterates.reserve(cascade.depth() + 1);
  for (const auto& block : cascade.blocks)
    iterates.push_back(block_step(iterates.back(), y, block, cascade.config, cascade.geometry, rng, sampling));
  return iterates;
}

std::int64_t block_parameter_count(const BlockConfig& c) {
  const std::int64_t kk = std::int64_t(c.kernel_size) * c.kernel_size;
  auto conv = [kk](std::int64_t in, std::int64_t out) { return in * out * kk + out; };
  const std::int64_t phi = 2 * conv(1, c.branch_channels) + conv(2 * c.branch_channels, c.merge_channels) +
                           conv(c.merge_channels, c.feature_channels);
  const std::int64_t theta = conv(c.feature_channels, 1);
  return phi + (c.mode == BayesMode::mfvi ? 2 * theta : theta);
}

ParameterCount count_parameters(const Cascade& cascade) {
  ParameterCount out;
  for (const auto& b : cascade.blocks) {
    std::int64_t n = b.branch_image.count() + b.branch_gradient.count() + b.merge_in.count() +
                     b.merge_out.count() + b.theta.mu.count();
    if (b.theta.variational()) n += b.theta.rho.count();
    out.per_block.push_back(n);
    out.total += n;
  }
  return out;
}

}  // namespace bdgd::model
