#include "intentseq/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "intentseq/errors.hpp"

namespace intentseq {

double accuracy(std::span<const double> p, std::span<const std::uint8_t> y,
                double threshold) {
  if (p.size() != y.size()) {
    throw LengthMismatch("accuracy: length mismatch");
  }
  if (p.empty()) throw EmptyBatch("accuracy: empty batch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::uint8_t pred = p[i] > threshold ? 1 : 0;
    if (pred == (y[i] ? 1 : 0)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(p.size());
}

double roc_auc(std::span<const double> p, std::span<const std::uint8_t> y) {
  if (p.size() != y.size()) {
    throw LengthMismatch("roc_auc: length mismatch");
  }
  if (p.empty()) throw EmptyBatch("roc_auc: empty batch");

  std::size_t positives = 0;
  for (const auto label : y) positives += label ? 1 : 0;
  const std::size_t negatives = p.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw SingleClassBatch("roc_auc: needs both classes, got " +
                           std::to_string(positives) + " positives of " +
                           std::to_string(p.size()));
  }

  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

  // Average ranks over tie groups; rank sums stay exact in double (all values
  // are small multiples of 0.5), so this matches pairwise counting bit for bit.
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && p[order[j + 1]] == p[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) {
      if (y[order[k]]) positive_rank_sum += avg_rank;
    }
    i = j + 1;
  }

  const double pos = static_cast<double>(positives);
  const double u = positive_rank_sum - pos * (pos + 1.0) / 2.0;
  return u / (pos * static_cast<double>(negatives));
}

}  // namespace intentseq
