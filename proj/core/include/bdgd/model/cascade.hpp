#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdgd/model/block.hpp"
#include "bdgd/tomo/geometry.hpp"

namespace bdgd::model {

/// K trained blocks applied in sequence, each fed the current iterate and
/// the data-fidelity gradient at that iterate.
struct Cascade {
  std::vector<BlockParams> blocks;
  tomo::Geometry geometry;
  BlockConfig config;
  std::string config_snapshot;

  std::size_t depth() const { return blocks.size(); }
  /// Observation variance of the last block (1 for an empty cascade).
  float final_sigma2() const;
};

/// Iterates x_k = block_apply(x_{k-1}, grad_data_fidelity(x_{k-1}, y), block_k).
/// Returns x_0 .. x_K (so K = 0 returns just x0). Blocks draw from `rng` in order.
std::vector<Image> cascade_forward(const tomo::Sinogram& y, const Image& x0, const Cascade& cascade,
                                   Rng& rng, Sampling sampling);

/// One block step on a single image.
Image block_step(const Image& x_prev, const tomo::Sinogram& y, const BlockParams& block,
                 const BlockConfig& config, const tomo::Geometry& geometry, Rng& rng, Sampling sampling);

struct ParameterCount {
  std::vector<std::int64_t> per_block;
  std::int64_t total = 0;
};

/// Closed-form count of one block's network parameters: phi plus theta, with
/// theta counted twice under mfvi (mean and rho). log sigma^2 is not counted.
std::int64_t block_parameter_count(const BlockConfig& config);
ParameterCount count_parameters(const Cascade& cascade);

}  // namespace bdgd::model
