#include "bdgd/ndgrad/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "bdgd/errors.hpp"

namespace bdgd::ndgrad {

AdamState::AdamState(std::span<const Tensor> params, AdamHyper h) : hyper(h) {
  for (const auto& p : params) {
    first_moment.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
    second_moment.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
  }
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (params.size() != state.first_moment.size())
    throw ShapeError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad())
      throw std::logic_error("adam_step: parameter " + std::to_string(i) + " has no gradient");
    if (static_cast<std::size_t>(params[i].numel()) != state.first_moment[i].size())
      throw ShapeError("adam_step: moment buffer size mismatch for parameter " + std::to_string(i));
  }
  const auto& h = state.hyper;
  state.step += 1;
  const double bias1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  const float b1 = static_cast<float>(h.beta1), b2 = static_cast<float>(h.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].mutable_data();
    const auto grad = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const float g = grad[j];
      m[j] = b1 * m[j] + (1.0f - b1) * g;
      v[j] = b2 * v[j] + (1.0f - b2) * g * g;
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      value[j] -= static_cast<float>(h.lr * m_hat / (std::sqrt(v_hat) + h.eps));
    }
    params[i].zero_grad();
  }
}

}  // namespace bdgd::ndgrad
