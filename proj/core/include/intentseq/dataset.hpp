#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "intentseq/matrix.hpp"

namespace intentseq {

inline constexpr std::size_t kLandmarkCount = 33;
inline constexpr std::size_t kLandmarkCoords = 2 * kLandmarkCount;  // x,y only
inline constexpr std::size_t kDefaultSeqLen = 15;

/// One video frame: 33 pose keypoints flattened to (x0,y0,...,x32,y32) plus
/// the binary crossing-intent label.
struct LandmarkFrame {
  std::uint32_t frame_index = 0;
  std::array<float, kLandmarkCoords> coords{};
  std::uint8_t label = 0;
};

struct LabeledVideo {
  std::string video_id;
  double fps = 30.0;
  std::vector<LandmarkFrame> frames;
};

/// A fixed-length feature window paired with the label of the frame that
/// follows it.
struct Window {
  Matrix<float> features;  // [seq_len x 66], rows are consecutive frames
  std::uint8_t target = 0;
  std::string video_id;
  std::uint32_t start_index = 0;
};

enum class SplitGranularity { window, video };

struct SplitSpec {
  double test_fraction = 0.10;
  double val_fraction = 0.20;  // applied to the remaining train pool
  std::uint64_t seed = 0;
  SplitGranularity granularity = SplitGranularity::window;
};

struct SplitResult {
  std::vector<Window> train;
  std::vector<Window> val;
  std::vector<Window> test;
};

struct ClassBalance {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double positive_fraction = 0.0;
};

/// Loads a landmark CSV (header `x0,y0,...,x32,y32,label`, one row per
/// frame). Labels must parse exactly to 0 or 1.
LabeledVideo load_video_csv(const std::filesystem::path& path, std::string video_id);

/// Replay variant: the label column may be absent; if present it is ignored
/// for prediction purposes but still validated and stored.
LabeledVideo load_replay_csv(const std::filesystem::path& path, std::string video_id);

void save_video_csv(const LabeledVideo& video, const std::filesystem::path& path);

/// Every frame at index >= reversal_index with label 1 is relabeled 0;
/// earlier frames are untouched.
LabeledVideo apply_backtrack_relabel(LabeledVideo video, std::size_t reversal_index);

/// Sliding windows: window k covers frames k..k+seq_len-1 and takes frame
/// k+seq_len's label as target. A video of N frames yields max(0, N - seq_len)
/// windows.
std::vector<Window> build_windows(const LabeledVideo& video,
                                  std::size_t seq_len = kDefaultSeqLen);

/// Deterministic shuffled split. |test| = round(test_fraction * N),
/// |val| = round(val_fraction * (N - |test|)). Video granularity assigns
/// whole videos to a partition, filling until the window-count target is
/// reached.
SplitResult split_dataset(std::vector<Window> windows, const SplitSpec& spec);

ClassBalance class_balance_stats(const std::vector<Window>& windows);

/// Loads every *.csv in dir (sorted by filename; manifest.csv excluded),
/// in parallel up to worker_cap() threads. video_id is the filename stem.
std::vector<LabeledVideo> load_video_dir(const std::filesystem::path& dir);

/// Optional per-sequence standardization: each feature column of the window
/// is shifted/scaled to zero mean, unit variance over its 15 frames.
void standardize_window(Matrix<float>& features);

}  // namespace intentseq
