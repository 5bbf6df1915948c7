#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "intentseq/errors.hpp"
#include "intentseq/matrix.hpp"

namespace intentseq {

/// Central-difference validation of an analytic gradient. `f` is a
/// scalar-valued function of the parameter matrix; run it in 64-bit.
/// Returns the max relative error over all coordinates, with denominator
/// max(|analytic|, |numeric|, 1e-8).
template <typename F>
double finite_diff_check(F&& f, Matrix<double> params,
                         const Matrix<double>& analytic_grad, double h = 1e-5) {
  if (params.rows() != analytic_grad.rows() || params.cols() != analytic_grad.cols()) {
    throw ShapeMismatch("finite_diff_check: gradient shape mismatch");
  }
  double max_rel = 0.0;
  for (std::size_t idx = 0; idx < params.size(); ++idx) {
    const double saved = params.data()[idx];
    params.data()[idx] = saved + h;
    const double fp = f(static_cast<const Matrix<double>&>(params));
    params.data()[idx] = saved - h;
    const double fm = f(static_cast<const Matrix<double>&>(params));
    params.data()[idx] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NonFiniteLoss("finite_diff_check: non-finite loss");
    }
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = analytic_grad.data()[idx];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
  }
  return max_rel;
}

}  // namespace intentseq
