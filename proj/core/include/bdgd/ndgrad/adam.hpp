#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bdgd/ndgrad/tensor.hpp"

namespace bdgd::ndgrad {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamHyper&) const = default;
};

/// Moment buffers for one parameter list, congruent with the parameters they
/// were created for.
struct AdamState {
  AdamHyper hyper;
  std::int64_t step = 0;
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;

  AdamState() = default;
  AdamState(std::span<const Tensor> params, AdamHyper h);
};

/// One bias-corrected Adam update of every parameter from its grad; grads
/// are cleared afterwards. Throws if a parameter has no grad.
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace bdgd::ndgrad
