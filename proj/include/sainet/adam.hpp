#pragma once

#include "sainet/tensor.hpp"

namespace sainet {

struct AdamState {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// One bias-corrected Adam update over `params`. Gradients are read, never
/// cleared; the caller resets them.
inline void adam_step(std::vector<Tensor>& params, AdamState& state) {
  require(state.lr >= 0.0, "adam learning rate must be >= 0");
  require(state.beta1 > 0.0 && state.beta1 < 1.0 && state.beta2 > 0.0 && state.beta2 < 1.0,
          "adam betas must lie in (0,1)");
  require(state.epsilon > 0.0, "adam epsilon must be positive");
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.numel(), 0.0);
      state.second_moment.emplace_back(p.numel(), 0.0);
    }
  }
  require(state.first_moment.size() == params.size() && state.second_moment.size() == params.size(),
          "adam state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i].has_grad(), "adam_step: parameter " + std::to_string(i) + " has no gradient");
    require(state.first_moment[i].size() == params[i].numel() &&
                state.second_moment[i].size() == params[i].numel(),
            "adam moment buffer shape mismatch for parameter " + std::to_string(i));
  }

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i].mutable_data();
    auto grad = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double g = grad[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      data[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

inline void zero_grads(std::vector<Tensor>& params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace sainet
