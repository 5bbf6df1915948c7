#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "intentseq/errors.hpp"

namespace intentseq {

template <typename T>
struct BceResult {
  double loss = 0.0;
  std::vector<T> grad;  // dL/dp per prediction, clamp-consistent
};

/// Mean binary cross-entropy, -mean(y ln p + (1-y) ln(1-p)), with p clamped
/// to [eps, 1-eps]. The gradient is evaluated at the clamped probability.
template <typename T>
BceResult<T> bce_loss(std::span<const T> p, std::span<const std::uint8_t> y,
                      double eps = 1e-7) {
  if (p.size() != y.size()) {
    throw LengthMismatch("bce_loss: " + std::to_string(p.size()) +
                         " probabilities vs " + std::to_string(y.size()) + " targets");
  }
  if (p.empty()) throw EmptyBatch("bce_loss: empty batch");

  BceResult<T> out;
  out.grad.resize(p.size());
  const double n = static_cast<double>(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double ph = std::min(std::max(static_cast<double>(p[i]), eps), 1.0 - eps);
    const double yi = y[i] ? 1.0 : 0.0;
    acc -= yi * std::log(ph) + (1.0 - yi) * std::log(1.0 - ph);
    out.grad[i] = static_cast<T>((-yi / ph + (1.0 - yi) / (1.0 - ph)) / n);
  }
  out.loss = acc / n;
  return out;
}

}  // namespace intentseq
