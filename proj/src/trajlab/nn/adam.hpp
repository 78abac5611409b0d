#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "trajlab/error.hpp"
#include "trajlab/nn/tensor.hpp"

namespace trajlab::nn {

// Bias-corrected Adam. beta1 doubles as the "momentum" hyperparameter.
template <typename T>
struct AdamState {
  std::uint64_t step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<BasicTensor<T>> m, v;

  AdamState() = default;
  AdamState(std::span<const BasicTensor<T>> params, double lr_, double beta1_,
            double beta2_ = 0.999, double eps_ = 1e-8)
      : lr(lr_), beta1(beta1_), beta2(beta2_), epsilon(eps_) {
    if (!(lr >= 0.0)) fail(ErrorKind::Parameter, "adam: lr must be non-negative");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
      fail(ErrorKind::Parameter, "adam: betas must lie in (0,1)");
    if (!(epsilon > 0.0)) fail(ErrorKind::Parameter, "adam: epsilon must be positive");
    for (const auto& p : params) {
      m.emplace_back(p.dims());
      v.emplace_back(p.dims());
    }
  }
};

// One update over a parameter list. step_count is shared by all tensors.
template <typename T>
void adam_step(std::span<BasicTensor<T>> params, std::span<const BasicTensor<T>> grads,
               AdamState<T>& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    fail(ErrorKind::Shape, "adam_step: parameter/gradient/state count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_same(params[k].dims(), grads[k].dims(), "adam_step param vs grad");
    require_same(params[k].dims(), state.m[k].dims(), "adam_step param vs state");
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1, b2 = state.beta2;
  for (std::size_t k = 0; k < params.size(); ++k) {
    T* p = params[k].data();
    const T* g = grads[k].data();
    T* m = state.m[k].data();
    T* v = state.v[k].data();
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double step = state.lr * (mi / bc1) / (std::sqrt(vi / bc2) + state.epsilon);
      p[i] = static_cast<T>(static_cast<double>(p[i]) - step);
    }
  }
}

template <typename T>
void adam_step(BasicTensor<T>& param, const BasicTensor<T>& grad, AdamState<T>& state) {
  adam_step(std::span<BasicTensor<T>>(&param, 1), std::span<const BasicTensor<T>>(&grad, 1),
            state);
}

}  // namespace trajlab::nn
