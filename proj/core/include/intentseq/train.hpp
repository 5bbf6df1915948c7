#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "intentseq/dataset.hpp"
#include "intentseq/model.hpp"
#include "intentseq/optimizer.hpp"

namespace intentseq {

struct TrainConfig {
  std::uint32_t epochs = 10;
  std::uint32_t batch_size = 32;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 0;
  double clamp_eps = 1e-7;

  void validate() const;
};

struct EpochRecord {
  std::uint32_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double train_auc = 0.0;
  double val_auc = 0.0;
};

struct Checkpoint {
  std::uint8_t version = 1;
  ModelConfig config;
  ModelParams<float> params;
  double best_val_auc = 0.0;
  std::uint64_t train_seed = 0;
  std::uint32_t epoch = 0;  // epoch the parameters were captured at, 1-based
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> records;
};

/// Per-epoch progress callback (after the epoch's record is complete).
using EpochCallback = std::function<void(const EpochRecord&)>;

/// BCE training with seeded per-epoch shuffling. Train-side metrics
/// accumulate over the epoch's training batches (dropout active); validation
/// metrics come from a full eval-mode pass after each epoch. The checkpoint
/// with the highest validation AUC is retained (ties keep the earlier epoch).
TrainResult train(const std::vector<Window>& train_windows,
                  const std::vector<Window>& val_windows, const ModelConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch = {});

struct EvalReport {
  double accuracy = 0.0;
  std::optional<double> auc;  // absent when the test set is single-class
  double mean_window_seconds = 0.0;
  std::size_t windows = 0;
};

/// Table-style test evaluation: accuracy, AUC and mean per-window forward
/// time (eval mode, batched).
EvalReport evaluate(const Checkpoint& checkpoint, const std::vector<Window>& test);

/// Eval-mode probabilities for a window set, in order.
std::vector<double> predict_probabilities(const Checkpoint& checkpoint,
                                          const std::vector<Window>& windows);

/// `epoch,train_loss,val_loss,train_acc,val_acc,train_auc,val_auc`
void write_metrics_csv(const std::vector<EpochRecord>& records,
                       const std::filesystem::path& path);

}  // namespace intentseq
