#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

#include "hap/core/error.hpp"

namespace hap::tensor {

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(std::size_t n, double lr)
      : m(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
        v(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
        learning_rate(lr) {
    require(lr > 0.0, "adam: learning rate must be positive");
  }
};

/// One bias-corrected Adam descent step: params -= lr * m_hat / (sqrt(v_hat) + eps).
inline void adam_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads,
                      AdamState& state) {
  require(params.size() == grads.size(), "adam: parameter/gradient size mismatch");
  require(state.m.size() == params.size() && state.v.size() == params.size(), "adam: state shape mismatch");
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -= state.learning_rate * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.epsilon);
}

}  // namespace hap::tensor
