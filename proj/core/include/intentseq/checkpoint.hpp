#pragma once

#include <filesystem>

#include "intentseq/train.hpp"

namespace intentseq {

// Checkpoint file layout (all multi-byte values little-endian):
//   magic "PSEQ", version byte 0x01,
//   model-kind byte (1=lstm, 2=gru, 3=cnn1d),
//   input, hidden, layers, kernel, seq_len as u32, dropout_p as f32,
//   tensor count as u32,
//   per tensor: name length u32 + UTF-8 name, rank u32, dims u32 each,
//               raw f32 payload,
//   trailer: best_val_auc f64, train seed u64, capture epoch u32.
// Tensor order and gate column order (f,i,candidate,o / r,z,candidate) follow
// param_views(). Files ending after the last tensor load with a zero trailer.

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace intentseq
