#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "intentseq/errors.hpp"
#include "intentseq/model.hpp"

namespace intentseq {

enum class OptimizerKind { sgd, adam };

/// Moment buffers laid out over the concatenation of all parameter views.
template <typename T>
struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<T> m;
  std::vector<T> v;
};

/// sgd: w -= lr*g. adam: bias-corrected first/second moments with
/// beta = (0.9, 0.999), eps = 1e-8.
template <typename T>
void optimizer_step(const std::vector<ParamView<T>>& params,
                    const std::vector<ParamView<const T>>& grads, OptimizerKind kind,
                    double lr, OptimizerState<T>& state) {
  if (params.size() != grads.size()) {
    throw ShapeMismatch("optimizer_step: tensor count mismatch");
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size != grads[i].size) {
      throw ShapeMismatch("optimizer_step: size mismatch for " + params[i].name);
    }
    for (std::size_t j = 0; j < grads[i].size; ++j) {
      if (!std::isfinite(static_cast<double>(grads[i].data[j]))) {
        throw NonFiniteGradient("non-finite gradient in " + grads[i].name);
      }
    }
    total += params[i].size;
  }

  if (kind == OptimizerKind::sgd) {
    const T step_size = static_cast<T>(lr);
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t j = 0; j < params[i].size; ++j) {
        params[i].data[j] -= step_size * grads[i].data[j];
      }
    }
    return;
  }

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  if (state.m.size() != total) {
    state.m.assign(total, T{});
    state.v.assign(total, T{});
    state.step = 0;
  }
  state.step += 1;
  const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));

  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* w = params[i].data;
    const T* g = grads[i].data;
    T* m = state.m.data() + offset;
    T* v = state.v.data() + offset;
    for (std::size_t j = 0; j < params[i].size; ++j) {
      const double gj = static_cast<double>(g[j]);
      const double mj = kBeta1 * static_cast<double>(m[j]) + (1.0 - kBeta1) * gj;
      const double vj = kBeta2 * static_cast<double>(v[j]) + (1.0 - kBeta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double m_hat = mj / bias1;
      const double v_hat = vj / bias2;
      w[j] -= static_cast<T>(lr * m_hat / (std::sqrt(v_hat) + kEps));
    }
    offset += params[i].size;
  }
}

}  // namespace intentseq
