#include "intentseq/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "intentseq/backprop.hpp"
#include "intentseq/errors.hpp"
#include "intentseq/loss.hpp"
#include "intentseq/metrics.hpp"
#include "intentseq/rng.hpp"

namespace intentseq {

namespace {

constexpr std::uint64_t kShuffleStream = 0x53485546ULL;
constexpr std::uint64_t kDropoutStream = 0x44524f50ULL;
constexpr std::uint64_t kInitStream = 0x57494e49ULL;

BatchInput<float> assemble_batch(const std::vector<Window>& windows,
                                 const std::vector<std::size_t>& order,
                                 std::size_t begin, std::size_t end,
                                 const ModelConfig& config,
                                 std::vector<std::uint8_t>& targets) {
  std::vector<const Matrix<float>*> features;
  features.reserve(end - begin);
  targets.clear();
  targets.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    const Window& w = windows[order[i]];
    features.push_back(&w.features);
    targets.push_back(w.target);
  }
  return batch_from_windows<float>(features, config.seq_len, config.input_size);
}

struct PassMetrics {
  double loss = 0.0;
  double acc = 0.0;
  double auc = 0.0;
};

PassMetrics metrics_from(const std::vector<double>& probs,
                         const std::vector<std::uint8_t>& targets, double loss) {
  PassMetrics m;
  m.loss = loss;
  m.acc = accuracy(probs, targets);
  m.auc = roc_auc(probs, targets);
  return m;
}

/// Eval-mode pass over a window list: probabilities plus mean BCE.
std::pair<std::vector<double>, double> eval_pass(const ModelParams<float>& params,
                                                 const std::vector<Window>& windows,
                                                 double clamp_eps,
                                                 std::size_t batch_size = 256) {
  std::vector<double> probs;
  probs.reserve(windows.size());
  double loss_sum = 0.0;
  std::vector<std::size_t> order(windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::uint8_t> targets;
  for (std::size_t begin = 0; begin < windows.size(); begin += batch_size) {
    const std::size_t end = std::min(begin + batch_size, windows.size());
    const BatchInput<float> batch =
        assemble_batch(windows, order, begin, end, params.config, targets);
    const std::vector<float> p = model_forward(batch, params, false, nullptr);
    const BceResult<float> bce =
        bce_loss<float>(std::span<const float>(p), std::span<const std::uint8_t>(targets),
                        clamp_eps);
    loss_sum += bce.loss * static_cast<double>(p.size());
    for (const float v : p) probs.push_back(static_cast<double>(v));
  }
  return {std::move(probs), loss_sum / static_cast<double>(windows.size())};
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw Error("epochs must be >= 1");
  if (batch_size < 1) throw Error("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) throw Error("clamp eps out of range");
}

TrainResult train(const std::vector<Window>& train_windows,
                  const std::vector<Window>& val_windows, const ModelConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch) {
  model_config.validate();
  train_config.validate();
  if (train_windows.empty() || val_windows.empty()) {
    throw EmptyDataset("train() needs non-empty train and val splits");
  }

  ModelParams<float> params = init_params<float>(
      model_config, Rng::derive(train_config.seed, kInitStream));
  auto views = param_views(params);
  OptimizerState<float> opt_state;

  TrainResult result;
  result.best.config = model_config;
  result.best.train_seed = train_config.seed;
  result.best.best_val_auc = -1.0;

  std::vector<std::size_t> order(train_windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::uint32_t epoch = 1; epoch <= train_config.epochs; ++epoch) {
    Rng shuffle_rng(Rng::derive(Rng::derive(train_config.seed, kShuffleStream), epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.bounded(i)]);
    }
    Rng dropout_rng(Rng::derive(Rng::derive(train_config.seed, kDropoutStream), epoch));

    std::vector<double> train_probs;
    std::vector<std::uint8_t> train_targets;
    train_probs.reserve(train_windows.size());
    train_targets.reserve(train_windows.size());
    double train_loss_sum = 0.0;

    std::vector<std::uint8_t> targets;
    for (std::size_t begin = 0; begin < order.size(); begin += train_config.batch_size) {
      const std::size_t end = std::min(begin + train_config.batch_size, order.size());
      const BatchInput<float> batch =
          assemble_batch(train_windows, order, begin, end, model_config, targets);

      ModelCaches<float> caches;
      const std::vector<float> probs =
          model_forward(batch, params, true, &dropout_rng, &caches);
      const BceResult<float> bce = bce_loss<float>(
          std::span<const float>(probs), std::span<const std::uint8_t>(targets),
          train_config.clamp_eps);
      if (!std::isfinite(bce.loss)) {
        throw DivergedLoss("non-finite training loss at epoch " + std::to_string(epoch));
      }
      train_loss_sum += bce.loss * static_cast<double>(probs.size());
      for (std::size_t i = 0; i < probs.size(); ++i) {
        train_probs.push_back(static_cast<double>(probs[i]));
        train_targets.push_back(targets[i]);
      }

      const ModelParams<float> grads =
          model_backward(params, caches, std::span<const float>(bce.grad),
                         train_config.clamp_eps);
      optimizer_step(views, param_views(grads), train_config.optimizer,
                     train_config.learning_rate, opt_state);
    }

    const PassMetrics train_metrics = metrics_from(
        train_probs, train_targets,
        train_loss_sum / static_cast<double>(train_windows.size()));

    auto [val_probs, val_loss] = eval_pass(params, val_windows, train_config.clamp_eps);
    std::vector<std::uint8_t> val_targets;
    val_targets.reserve(val_windows.size());
    for (const auto& w : val_windows) val_targets.push_back(w.target);
    const PassMetrics val_metrics = metrics_from(val_probs, val_targets, val_loss);

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = train_metrics.loss;
    record.val_loss = val_metrics.loss;
    record.train_acc = train_metrics.acc;
    record.val_acc = val_metrics.acc;
    record.train_auc = train_metrics.auc;
    record.val_auc = val_metrics.auc;
    result.records.push_back(record);

    if (!std::isfinite(val_metrics.loss)) {
      throw DivergedLoss("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    if (val_metrics.auc > result.best.best_val_auc) {
      result.best.best_val_auc = val_metrics.auc;
      result.best.params = params;
      result.best.epoch = epoch;
    }
    if (on_epoch) on_epoch(record);
  }
  return result;
}

std::vector<double> predict_probabilities(const Checkpoint& checkpoint,
                                          const std::vector<Window>& windows) {
  return eval_pass(checkpoint.params, windows, 1e-7).first;
}

EvalReport evaluate(const Checkpoint& checkpoint, const std::vector<Window>& test) {
  if (test.empty()) throw EmptyDataset("evaluate: empty test set");
  const ModelConfig& config = checkpoint.config;

  std::vector<double> probs;
  probs.reserve(test.size());
  std::vector<std::uint8_t> targets;
  targets.reserve(test.size());
  for (const auto& w : test) targets.push_back(w.target);

  std::vector<std::size_t> order(test.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::uint8_t> batch_targets;
  double forward_seconds = 0.0;
  constexpr std::size_t kBatch = 256;
  for (std::size_t begin = 0; begin < test.size(); begin += kBatch) {
    const std::size_t end = std::min(begin + kBatch, test.size());
    const BatchInput<float> batch =
        assemble_batch(test, order, begin, end, config, batch_targets);
    const auto start = std::chrono::steady_clock::now();
    const std::vector<float> p = model_forward(batch, checkpoint.params, false, nullptr);
    forward_seconds +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const float v : p) probs.push_back(static_cast<double>(v));
  }

  EvalReport report;
  report.windows = test.size();
  report.accuracy = accuracy(probs, targets);
  report.mean_window_seconds = forward_seconds / static_cast<double>(test.size());
  try {
    report.auc = roc_auc(probs, targets);
  } catch (const SingleClassBatch&) {
    report.auc.reset();
  }
  return report;
}

void write_metrics_csv(const std::vector<EpochRecord>& records,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot write " + path.string());
  out << "epoch,train_loss,val_loss,train_acc,val_acc,train_auc,val_auc\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%u,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", r.epoch,
                  r.train_loss, r.val_loss, r.train_acc, r.val_acc, r.train_auc,
                  r.val_auc);
    out << buf;
  }
  if (!out) throw IoFailure("short write to " + path.string());
}

}  // namespace intentseq
