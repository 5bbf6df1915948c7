#include "intentseq/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "intentseq/errors.hpp"
#include "intentseq/rng.hpp"
#include "intentseq/threading.hpp"

namespace intentseq {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

bool parse_float(std::string_view field, float& out) {
  const char* first = field.data();
  const char* last = field.data() + field.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last && std::isfinite(out);
}

LabeledVideo load_csv_impl(const std::filesystem::path& path, std::string video_id,
                           bool label_optional) {
  std::ifstream in(path);
  if (!in) throw EmptyFile("cannot open " + path.string());

  LabeledVideo video;
  video.video_id = std::move(video_id);

  std::string line;
  std::size_t line_no = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();  // CRLF
    if (line.empty()) continue;

    const auto fields = split_fields(line);
    if (first_content_line) {
      first_content_line = false;
      float probe;
      if (!parse_float(fields[0], probe)) continue;  // header row
    }

    const bool has_label = fields.size() == kLandmarkCoords + 1;
    if (!has_label && !(label_optional && fields.size() == kLandmarkCoords)) {
      throw MalformedRow("row " + std::to_string(line_no) + " in " + path.string() +
                         ": expected " + std::to_string(kLandmarkCoords + 1) +
                         " fields, got " + std::to_string(fields.size()));
    }

    LandmarkFrame frame;
    frame.frame_index = static_cast<std::uint32_t>(video.frames.size());
    for (std::size_t i = 0; i < kLandmarkCoords; ++i) {
      if (!parse_float(fields[i], frame.coords[i])) {
        throw MalformedRow("row " + std::to_string(line_no) + " in " + path.string() +
                           ": field " + std::to_string(i + 1) + " is not numeric");
      }
    }
    if (has_label) {
      float label;
      if (!parse_float(fields[kLandmarkCoords], label)) {
        throw MalformedRow("row " + std::to_string(line_no) + " in " + path.string() +
                           ": label is not numeric");
      }
      if (label != 0.0f && label != 1.0f) {
        throw NonBinaryLabel("row " + std::to_string(line_no) + " in " + path.string() +
                             ": label must be exactly 0 or 1");
      }
      frame.label = label == 1.0f ? 1 : 0;
    }
    video.frames.push_back(frame);
  }
  if (video.frames.empty()) {
    throw EmptyFile(path.string() + " has no data rows");
  }
  return video;
}

}  // namespace

LabeledVideo load_video_csv(const std::filesystem::path& path, std::string video_id) {
  return load_csv_impl(path, std::move(video_id), /*label_optional=*/false);
}

LabeledVideo load_replay_csv(const std::filesystem::path& path, std::string video_id) {
  return load_csv_impl(path, std::move(video_id), /*label_optional=*/true);
}

void save_video_csv(const LabeledVideo& video, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot write " + path.string());
  for (std::size_t k = 0; k < kLandmarkCount; ++k) {
    out << (k ? "," : "") << 'x' << k << ",y" << k;
  }
  out << ",label\n";
  char buf[32];
  for (const auto& frame : video.frames) {
    std::string row;
    row.reserve(kLandmarkCoords * 12 + 2);
    for (std::size_t i = 0; i < kLandmarkCoords; ++i) {
      // %.9g round-trips float exactly through the parser.
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(frame.coords[i]));
      row += buf;
      row += ',';
    }
    row += frame.label ? '1' : '0';
    row += '\n';
    out << row;
  }
  if (!out) throw IoFailure("short write to " + path.string());
}

LabeledVideo apply_backtrack_relabel(LabeledVideo video, std::size_t reversal_index) {
  if (reversal_index >= video.frames.size()) {
    throw IndexOutOfRange("reversal index " + std::to_string(reversal_index) +
                          " >= frame count " + std::to_string(video.frames.size()));
  }
  for (std::size_t i = reversal_index; i < video.frames.size(); ++i) {
    if (video.frames[i].label == 1) video.frames[i].label = 0;
  }
  return video;
}

std::vector<Window> build_windows(const LabeledVideo& video, std::size_t seq_len) {
  std::vector<Window> windows;
  const std::size_t n = video.frames.size();
  if (seq_len == 0 || n <= seq_len) return windows;
  windows.reserve(n - seq_len);
  for (std::size_t k = 0; k + seq_len < n; ++k) {
    Window w;
    w.features = Matrix<float>(seq_len, kLandmarkCoords);
    for (std::size_t t = 0; t < seq_len; ++t) {
      const auto& coords = video.frames[k + t].coords;
      std::copy(coords.begin(), coords.end(), w.features.row(t));
    }
    w.target = video.frames[k + seq_len].label;
    w.video_id = video.video_id;
    w.start_index = static_cast<std::uint32_t>(k);
    windows.push_back(std::move(w));
  }
  return windows;
}

namespace {

// Portable Fisher-Yates; std::shuffle's draw sequence is
// implementation-defined.
template <typename V>
void seeded_shuffle(V& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.bounded(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace

SplitResult split_dataset(std::vector<Window> windows, const SplitSpec& spec) {
  if (windows.empty()) throw EmptyDataset("split_dataset: no windows");
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) ||
      !(spec.val_fraction > 0.0 && spec.val_fraction < 1.0)) {
    throw DegenerateSplit("split fractions must lie in (0,1)");
  }

  const std::size_t n = windows.size();
  const auto n_test =
      static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(
      std::llround(spec.val_fraction * static_cast<double>(n - n_test)));

  Rng rng(Rng::derive(spec.seed, 0x53504c49ULL));  // split stream
  SplitResult result;

  if (spec.granularity == SplitGranularity::window) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    seeded_shuffle(order, rng);
    for (std::size_t i = 0; i < n; ++i) {
      Window& w = windows[order[i]];
      if (i < n_test) {
        result.test.push_back(std::move(w));
      } else if (i < n_test + n_val) {
        result.val.push_back(std::move(w));
      } else {
        result.train.push_back(std::move(w));
      }
    }
  } else {
    // Whole videos per partition: fill test, then val, until the window-count
    // targets are reached.
    std::vector<std::string> video_order;
    for (const auto& w : windows) {
      if (video_order.empty() || video_order.back() != w.video_id) {
        if (std::find(video_order.begin(), video_order.end(), w.video_id) ==
            video_order.end()) {
          video_order.push_back(w.video_id);
        }
      }
    }
    seeded_shuffle(video_order, rng);
    std::vector<std::size_t> counts(video_order.size(), 0);
    for (const auto& w : windows) {
      const auto it = std::find(video_order.begin(), video_order.end(), w.video_id);
      counts[static_cast<std::size_t>(it - video_order.begin())]++;
    }
    enum Part { kTest, kVal, kTrain };
    std::vector<Part> assignment(video_order.size(), kTrain);
    std::size_t assigned_test = 0, assigned_val = 0;
    for (std::size_t v = 0; v < video_order.size(); ++v) {
      if (assigned_test < n_test) {
        assignment[v] = kTest;
        assigned_test += counts[v];
      } else if (assigned_val < n_val) {
        assignment[v] = kVal;
        assigned_val += counts[v];
      }
    }
    for (auto& w : windows) {
      const auto it = std::find(video_order.begin(), video_order.end(), w.video_id);
      switch (assignment[static_cast<std::size_t>(it - video_order.begin())]) {
        case kTest: result.test.push_back(std::move(w)); break;
        case kVal: result.val.push_back(std::move(w)); break;
        case kTrain: result.train.push_back(std::move(w)); break;
      }
    }
  }

  if (result.train.empty() || result.val.empty() || result.test.empty()) {
    throw DegenerateSplit("split produced an empty partition (train " +
                          std::to_string(result.train.size()) + ", val " +
                          std::to_string(result.val.size()) + ", test " +
                          std::to_string(result.test.size()) + ")");
  }
  return result;
}

ClassBalance class_balance_stats(const std::vector<Window>& windows) {
  ClassBalance stats;
  for (const auto& w : windows) {
    if (w.target) {
      ++stats.positives;
    } else {
      ++stats.negatives;
    }
  }
  stats.positive_fraction =
      windows.empty() ? 0.0
                      : static_cast<double>(stats.positives) /
                            static_cast<double>(windows.size());
  return stats;
}

std::vector<LabeledVideo> load_video_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    if (p.extension() != ".csv") continue;
    if (p.filename() == "manifest.csv") continue;
    files.push_back(p);
  }
  if (files.empty()) throw EmptyDataset("no landmark CSVs in " + dir.string());
  std::sort(files.begin(), files.end());

  std::vector<LabeledVideo> videos(files.size());
  parallel_for(files.size(), [&](std::size_t i) {
    videos[i] = load_video_csv(files[i], files[i].stem().string());
  });
  return videos;
}

void standardize_window(Matrix<float>& features) {
  const std::size_t rows = features.rows(), cols = features.cols();
  if (rows == 0) return;
  for (std::size_t j = 0; j < cols; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < rows; ++i) mean += features(i, j);
    mean /= static_cast<double>(rows);
    double var = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      const double d = features(i, j) - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(rows));
    const float inv = static_cast<float>(1.0 / (sd + 1e-8));
    for (std::size_t i = 0; i < rows; ++i) {
      features(i, j) = static_cast<float>((features(i, j) - mean)) * inv;
    }
  }
}

}  // namespace intentseq
