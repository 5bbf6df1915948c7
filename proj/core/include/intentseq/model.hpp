#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "intentseq/errors.hpp"
#include "intentseq/matrix.hpp"
#include "intentseq/rng.hpp"

namespace intentseq {

/// Checkpoint wire values: 1=lstm, 2=gru, 3=cnn1d.
enum class ModelKind : std::uint8_t { lstm = 1, gru = 2, cnn1d = 3 };

inline bool is_recurrent(ModelKind kind) {
  return kind == ModelKind::lstm || kind == ModelKind::gru;
}

inline std::size_t gate_count(ModelKind kind) {
  switch (kind) {
    case ModelKind::lstm: return 4;  // f, i, candidate, o
    case ModelKind::gru: return 3;   // r, z, candidate
    case ModelKind::cnn1d: return 0;
  }
  throw InvalidKind("unknown model kind");
}

inline const char* kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::lstm: return "lstm";
    case ModelKind::gru: return "gru";
    case ModelKind::cnn1d: return "cnn1d";
  }
  throw InvalidKind("unknown model kind");
}

std::optional<ModelKind> parse_kind(const std::string& name);

struct ModelConfig {
  ModelKind kind = ModelKind::lstm;
  std::uint32_t input_size = 66;
  std::uint32_t hidden = 50;  // hidden units; conv output channels for cnn1d
  std::uint32_t layers = 2;   // stacked recurrent layers
  std::uint32_t kernel = 3;   // cnn1d kernel width
  std::uint32_t seq_len = 15;
  float dropout_p = 0.5f;

  void validate() const;
};

/// One stacked recurrent layer. `w` maps [h_{t-1}, x_t] (width input+hidden)
/// to gates*hidden pre-activations; gate column order is (f, i, candidate, o)
/// for LSTM and (r, z, candidate) for GRU. The two bias vectors are summed
/// before use, so they only ever act through b_input + b_hidden.
template <typename T>
struct RecurrentLayerParams {
  Matrix<T> w;
  std::vector<T> b_input;
  std::vector<T> b_hidden;
};

/// Valid cross-correlation weights, laid out [out_channels][in_channels][k].
template <typename T>
struct Conv1dParams {
  std::vector<T> w;
  std::vector<T> b;
};

/// Final 50 -> 1 linear map.
template <typename T>
struct HeadParams {
  std::vector<T> w;
  T b{};
};

template <typename T>
struct ModelParams {
  ModelConfig config;
  std::vector<RecurrentLayerParams<T>> layers;  // recurrent kinds
  Conv1dParams<T> conv;                         // cnn1d
  HeadParams<T> head;
};

template <typename T>
struct RecurrentState {
  Matrix<T> h;  // [batch, hidden]
  Matrix<T> c;  // [batch, hidden]; LSTM only
};

template <typename T>
struct LstmGates {
  Matrix<T> f, i, g, o;  // g is the candidate cell value, in (-1, 1)
};

template <typename T>
struct GruGates {
  Matrix<T> r, z, g;  // g is the candidate hidden state
};

template <typename T>
struct LstmCellOutput {
  RecurrentState<T> state;
  LstmGates<T> gates;
};

template <typename T>
struct GruCellOutput {
  RecurrentState<T> state;
  GruGates<T> gates;
};

/// Per-timestep activations retained for backpropagation through time.
template <typename T>
struct LstmStepCache {
  Matrix<T> concat;  // [h_{t-1}, x_t]
  Matrix<T> f, i, g, o;
  Matrix<T> c_prev, c_new, tanh_c;
  Matrix<T> h;  // o * tanh(c_new)
};

template <typename T>
struct GruStepCache {
  Matrix<T> concat;        // [h_{t-1}, x_t]
  Matrix<T> concat_reset;  // [r * h_{t-1}, x_t]
  Matrix<T> r, z, g;
  Matrix<T> h_prev;
  Matrix<T> h;
};

template <typename T>
struct HeadCache {
  Matrix<T> input_pre_dropout;  // [batch, hidden]
  Matrix<T> dropout_mask;       // scaled keep mask; empty when identity
  Matrix<T> input;              // after dropout
  std::vector<T> u;             // linear pre-activation
  std::vector<T> probs;
};

template <typename T>
struct RecurrentCache {
  std::vector<std::vector<LstmStepCache<T>>> lstm;  // [layer][t]
  std::vector<std::vector<GruStepCache<T>>> gru;
  HeadCache<T> head;
};

template <typename T>
struct ConvCache {
  Tensor3<T> input;  // [batch, channels, time]
  Tensor3<T> pre;    // pre-ReLU feature map [batch, out_channels, time-k+1]
  HeadCache<T> head;
};

template <typename T>
struct ModelCaches {
  RecurrentCache<T> recurrent;
  ConvCache<T> conv;
};

/// A batch of windows as per-timestep input matrices: steps[t] is
/// [batch, input_size].
template <typename T>
struct BatchInput {
  std::vector<Matrix<T>> steps;

  std::size_t seq_len() const { return steps.size(); }
  std::size_t batch() const { return steps.empty() ? 0 : steps[0].rows(); }
  std::size_t input_size() const { return steps.empty() ? 0 : steps[0].cols(); }
};

// ---------------------------------------------------------------------------
// Cells
// ---------------------------------------------------------------------------

/// One LSTM step:
///   f,i,o = sigmoid([h,x]w + b), candidate = tanh([h,x]w + b)   (per gate block)
///   c_t = f*c_{t-1} + i*candidate,  h_t = o*tanh(c_t)
template <typename T>
LstmCellOutput<T> lstm_cell(const Matrix<T>& x_t, const RecurrentState<T>& state,
                            const RecurrentLayerParams<T>& p);

/// One GRU step, reset applied before the candidate matmul:
///   r,z = sigmoid([h,x]w + b)
///   candidate = tanh([r*h, x]w + b)
///   h_t = (1-z)*candidate + z*h_{t-1}
template <typename T>
GruCellOutput<T> gru_cell(const Matrix<T>& x_t, const RecurrentState<T>& state,
                          const RecurrentLayerParams<T>& p);

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

/// Stacked recurrent forward: layer 0 consumes the inputs, each further layer
/// consumes the hidden sequence below; the top layer's final hidden state
/// passes through dropout (training only), then the linear head and sigmoid.
template <typename T>
std::vector<T> recurrent_forward(const BatchInput<T>& x, const ModelParams<T>& params,
                                 bool training, Rng* rng,
                                 RecurrentCache<T>* cache = nullptr);

/// Single conv layer (valid cross-correlation over time), ReLU, global
/// average pooling, linear head, sigmoid. No dropout.
template <typename T>
std::vector<T> conv1d_forward(const BatchInput<T>& x, const ModelParams<T>& params,
                              bool training, ConvCache<T>* cache = nullptr);

/// Dispatch on params.config.kind.
template <typename T>
std::vector<T> model_forward(const BatchInput<T>& x, const ModelParams<T>& params,
                             bool training, Rng* rng, ModelCaches<T>* caches = nullptr);

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct ParamCountBreakdown {
  std::size_t backbone = 0;  // recurrent stack or conv layer
  std::size_t head = 0;
  std::size_t total = 0;
};

ParamCountBreakdown param_count_breakdown(const ModelConfig& config);
std::size_t count_params(const ModelConfig& config);

/// Uniform init: +-1/sqrt(hidden) for recurrent and head tensors,
/// +-1/sqrt(in_channels*k) for conv tensors. Deterministic per seed; the
/// draw sequence is identical for float and double instantiation.
template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed);

template <typename T>
ModelParams<T> zero_params(const ModelConfig& config);

template <typename T>
ModelParams<T> zero_like(const ModelParams<T>& params);

/// Inverted dropout: zero with probability p, scale survivors by 1/(1-p);
/// identity in eval mode. Pass `mask` to retain the scaled keep mask.
template <typename T>
Matrix<T> dropout_apply(const Matrix<T>& h, double p, bool training, Rng* rng,
                        Matrix<T>* mask = nullptr);

/// Flat named access to every parameter tensor, in a fixed order (layers,
/// conv, head). The same order defines the checkpoint tensor sequence and
/// the optimizer state layout.
template <typename T>
struct ParamView {
  std::string name;
  T* data = nullptr;
  std::size_t size = 0;
  std::vector<std::uint32_t> dims;
};

template <typename T>
std::vector<ParamView<T>> param_views(ModelParams<T>& params);

template <typename T>
std::vector<ParamView<const T>> param_views(const ModelParams<T>& params);

// ---------------------------------------------------------------------------
// Batch assembly
// ---------------------------------------------------------------------------

template <typename T>
BatchInput<T> batch_from_windows(const std::vector<const Matrix<float>*>& features,
                                 std::size_t seq_len, std::size_t input_size);

}  // namespace intentseq

#include "intentseq/model_impl.hpp"
