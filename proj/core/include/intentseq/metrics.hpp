#pragma once

#include <cstdint>
#include <span>

namespace intentseq {

/// Fraction of predictions matching targets; prediction is 1 iff p > threshold.
double accuracy(std::span<const double> p, std::span<const std::uint8_t> y,
                double threshold = 0.5);

/// Mann-Whitney AUC: (wins + 0.5*ties) / (positives * negatives) over all
/// positive-negative score pairs, computed via average ranks. Requires both
/// classes present.
double roc_auc(std::span<const double> p, std::span<const std::uint8_t> y);

}  // namespace intentseq
