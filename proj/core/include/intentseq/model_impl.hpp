#pragma once

// Template implementations for model.hpp. Include model.hpp, not this file.

#include <cmath>

namespace intentseq {

inline std::optional<ModelKind> parse_kind(const std::string& name) {
  if (name == "lstm") return ModelKind::lstm;
  if (name == "gru") return ModelKind::gru;
  if (name == "cnn1d" || name == "cnn") return ModelKind::cnn1d;
  return std::nullopt;
}

inline void ModelConfig::validate() const {
  if (kind != ModelKind::lstm && kind != ModelKind::gru && kind != ModelKind::cnn1d) {
    throw InvalidKind("invalid model kind byte");
  }
  if (input_size == 0 || hidden == 0 || seq_len == 0) {
    throw Error("model config sizes must be positive");
  }
  if (is_recurrent(kind) && layers == 0) {
    throw Error("recurrent models need at least one layer");
  }
  if (kind == ModelKind::cnn1d && kernel == 0) {
    throw Error("conv kernel must be positive");
  }
  if (!(dropout_p >= 0.0f && dropout_p < 1.0f)) {
    throw Error("dropout probability must lie in [0,1)");
  }
}

namespace detail {

template <typename T>
std::size_t layer_input_size(const ModelConfig& config, std::size_t layer) {
  return layer == 0 ? config.input_size : config.hidden;
}

template <typename T>
void check_layer_shapes(const ModelConfig& config, const ModelParams<T>& params) {
  const std::size_t gates = gate_count(config.kind);
  if (params.layers.size() != config.layers) {
    throw ShapeMismatch("parameter stack depth does not match config");
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const std::size_t in = layer_input_size<T>(config, l);
    const auto& p = params.layers[l];
    if (p.w.rows() != in + config.hidden || p.w.cols() != gates * config.hidden ||
        p.b_input.size() != gates * config.hidden ||
        p.b_hidden.size() != gates * config.hidden) {
      throw ShapeMismatch("layer " + std::to_string(l) + " parameter shapes");
    }
  }
  if (params.head.w.size() != config.hidden) {
    throw ShapeMismatch("head width does not match hidden size");
  }
}

/// b_input + b_hidden, formed before the row add so the biases only ever act
/// through their sum.
template <typename T>
std::vector<T> bias_sum(const RecurrentLayerParams<T>& p) {
  std::vector<T> b(p.b_input.size());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = p.b_input[i] + p.b_hidden[i];
  return b;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Cells
// ---------------------------------------------------------------------------

template <typename T>
void lstm_step(const Matrix<T>& x_t, const Matrix<T>& h_prev, const Matrix<T>& c_prev,
               const RecurrentLayerParams<T>& p, LstmStepCache<T>& s) {
  const std::size_t hidden = h_prev.cols();
  const std::size_t batch = x_t.rows();
  if (h_prev.rows() != batch || c_prev.rows() != batch ||
      p.w.rows() != hidden + x_t.cols() || p.w.cols() != 4 * hidden) {
    throw ShapeMismatch("lstm_cell: inconsistent shapes");
  }

  s.concat = concat_rows(h_prev, x_t);
  Matrix<T> pre = matmul(s.concat, p.w);
  add_row_vector(pre, detail::bias_sum(p));

  s.f = Matrix<T>(batch, hidden);
  s.i = Matrix<T>(batch, hidden);
  s.g = Matrix<T>(batch, hidden);
  s.o = Matrix<T>(batch, hidden);
  s.c_prev = c_prev;
  s.c_new = Matrix<T>(batch, hidden);
  s.tanh_c = Matrix<T>(batch, hidden);
  s.h = Matrix<T>(batch, hidden);

  for (std::size_t b = 0; b < batch; ++b) {
    const T* pr = pre.row(b);
    const T* cp = c_prev.row(b);
    T* f = s.f.row(b);
    T* i = s.i.row(b);
    T* g = s.g.row(b);
    T* o = s.o.row(b);
    T* cn = s.c_new.row(b);
    T* tc = s.tanh_c.row(b);
    T* h = s.h.row(b);
    for (std::size_t j = 0; j < hidden; ++j) {
      f[j] = sigmoid_scalar(pr[j]);
      i[j] = sigmoid_scalar(pr[hidden + j]);
      g[j] = std::tanh(pr[2 * hidden + j]);
      o[j] = sigmoid_scalar(pr[3 * hidden + j]);
      cn[j] = f[j] * cp[j] + i[j] * g[j];
      tc[j] = std::tanh(cn[j]);
      h[j] = o[j] * tc[j];
    }
  }
}

template <typename T>
LstmCellOutput<T> lstm_cell(const Matrix<T>& x_t, const RecurrentState<T>& state,
                            const RecurrentLayerParams<T>& p) {
  LstmStepCache<T> s;
  lstm_step(x_t, state.h, state.c, p, s);
  LstmCellOutput<T> out;
  out.state.h = s.h;
  out.state.c = s.c_new;
  out.gates.f = std::move(s.f);
  out.gates.i = std::move(s.i);
  out.gates.g = std::move(s.g);
  out.gates.o = std::move(s.o);
  return out;
}

template <typename T>
void gru_step(const Matrix<T>& x_t, const Matrix<T>& h_prev,
              const RecurrentLayerParams<T>& p, GruStepCache<T>& s) {
  const std::size_t hidden = h_prev.cols();
  const std::size_t batch = x_t.rows();
  if (h_prev.rows() != batch || p.w.rows() != hidden + x_t.cols() ||
      p.w.cols() != 3 * hidden) {
    throw ShapeMismatch("gru_cell: inconsistent shapes");
  }

  const std::vector<T> bias = detail::bias_sum(p);
  s.h_prev = h_prev;
  s.concat = concat_rows(h_prev, x_t);

  // r and z share the [h_{t-1}, x_t] input.
  Matrix<T> pre_rz = matmul_cols(s.concat, p.w, 0, 2 * hidden);
  s.r = Matrix<T>(batch, hidden);
  s.z = Matrix<T>(batch, hidden);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* pr = pre_rz.row(b);
    T* r = s.r.row(b);
    T* z = s.z.row(b);
    for (std::size_t j = 0; j < hidden; ++j) {
      r[j] = sigmoid_scalar(pr[j] + bias[j]);
      z[j] = sigmoid_scalar(pr[hidden + j] + bias[hidden + j]);
    }
  }

  // Candidate sees the reset hidden state before its matmul.
  s.concat_reset = concat_rows(hadamard(s.r, h_prev), x_t);
  Matrix<T> pre_g = matmul_cols(s.concat_reset, p.w, 2 * hidden, 3 * hidden);
  s.g = Matrix<T>(batch, hidden);
  s.h = Matrix<T>(batch, hidden);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* pg = pre_g.row(b);
    const T* hp = h_prev.row(b);
    const T* z = s.z.row(b);
    T* g = s.g.row(b);
    T* h = s.h.row(b);
    for (std::size_t j = 0; j < hidden; ++j) {
      g[j] = std::tanh(pg[j] + bias[2 * hidden + j]);
      h[j] = (T{1} - z[j]) * g[j] + z[j] * hp[j];
    }
  }
}

template <typename T>
GruCellOutput<T> gru_cell(const Matrix<T>& x_t, const RecurrentState<T>& state,
                          const RecurrentLayerParams<T>& p) {
  GruStepCache<T> s;
  gru_step(x_t, state.h, p, s);
  GruCellOutput<T> out;
  out.state.h = s.h;
  out.gates.r = std::move(s.r);
  out.gates.z = std::move(s.z);
  out.gates.g = std::move(s.g);
  return out;
}

// ---------------------------------------------------------------------------
// Dropout and head
// ---------------------------------------------------------------------------

template <typename T>
Matrix<T> dropout_apply(const Matrix<T>& h, double p, bool training, Rng* rng,
                        Matrix<T>* mask) {
  if (mask) *mask = Matrix<T>();
  if (!training || p <= 0.0) return h;
  if (!(p < 1.0)) throw Error("dropout probability must lie in [0,1)");
  if (!rng) throw Error("dropout in training mode needs a random source");
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  Matrix<T> keep(h.rows(), h.cols());
  Matrix<T> out(h.rows(), h.cols());
  for (std::size_t idx = 0; idx < h.size(); ++idx) {
    const T m = rng->uniform() >= p ? scale : T{0};
    keep.data()[idx] = m;
    out.data()[idx] = h.data()[idx] * m;
  }
  if (mask) *mask = std::move(keep);
  return out;
}

namespace detail {

template <typename T>
void head_forward(const Matrix<T>& top, const ModelParams<T>& params, bool use_dropout,
                  bool training, Rng* rng, HeadCache<T>& head) {
  head.input_pre_dropout = top;
  head.input = use_dropout
                   ? dropout_apply(top, params.config.dropout_p, training, rng,
                                   &head.dropout_mask)
                   : top;
  const std::size_t batch = top.rows();
  head.u.assign(batch, T{});
  head.probs.assign(batch, T{});
  for (std::size_t b = 0; b < batch; ++b) {
    const T* row = head.input.row(b);
    T acc = params.head.b;
    for (std::size_t j = 0; j < params.head.w.size(); ++j) {
      acc += row[j] * params.head.w[j];
    }
    head.u[b] = acc;
    head.probs[b] = sigmoid_scalar(acc);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

template <typename T>
std::vector<T> recurrent_forward(const BatchInput<T>& x, const ModelParams<T>& params,
                                 bool training, Rng* rng, RecurrentCache<T>* cache) {
  const ModelConfig& config = params.config;
  if (!is_recurrent(config.kind)) {
    throw InvalidKind("recurrent_forward requires an lstm or gru config");
  }
  config.validate();
  detail::check_layer_shapes(config, params);
  if (x.steps.empty()) throw ShapeMismatch("empty input sequence");
  for (const auto& step : x.steps) {
    if (step.rows() != x.batch() || step.cols() != config.input_size) {
      throw ShapeMismatch("input step shape does not match config");
    }
  }

  RecurrentCache<T> local;
  RecurrentCache<T>& c = cache ? *cache : local;
  c.lstm.clear();
  c.gru.clear();
  const std::size_t batch = x.batch();
  const std::size_t steps = x.seq_len();

  std::vector<Matrix<T>> inputs;  // current layer's input sequence
  const std::vector<Matrix<T>>* layer_in = &x.steps;

  for (std::size_t l = 0; l < config.layers; ++l) {
    std::vector<Matrix<T>> h_seq;
    h_seq.reserve(steps);
    Matrix<T> h(batch, config.hidden);
    Matrix<T> cstate(batch, config.hidden);
    if (config.kind == ModelKind::lstm) {
      std::vector<LstmStepCache<T>> layer_cache(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        lstm_step((*layer_in)[t], h, cstate, params.layers[l], layer_cache[t]);
        h = layer_cache[t].h;
        cstate = layer_cache[t].c_new;
        h_seq.push_back(h);
      }
      c.lstm.push_back(std::move(layer_cache));
    } else {
      std::vector<GruStepCache<T>> layer_cache(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        gru_step((*layer_in)[t], h, params.layers[l], layer_cache[t]);
        h = layer_cache[t].h;
        h_seq.push_back(h);
      }
      c.gru.push_back(std::move(layer_cache));
    }
    inputs = std::move(h_seq);
    layer_in = &inputs;
  }

  detail::head_forward(inputs.back(), params, /*use_dropout=*/true, training, rng,
                       c.head);
  return c.head.probs;
}

template <typename T>
std::vector<T> conv1d_forward(const BatchInput<T>& x, const ModelParams<T>& params,
                              bool training, ConvCache<T>* cache) {
  const ModelConfig& config = params.config;
  if (config.kind != ModelKind::cnn1d) {
    throw InvalidKind("conv1d_forward requires a cnn1d config");
  }
  config.validate();
  if (x.steps.empty()) throw ShapeMismatch("empty input sequence");
  if (x.seq_len() < config.kernel) {
    throw SequenceTooShort("sequence length " + std::to_string(x.seq_len()) +
                           " shorter than kernel " + std::to_string(config.kernel));
  }
  const std::size_t batch = x.batch();
  const std::size_t in_ch = config.input_size;
  const std::size_t out_ch = config.hidden;
  const std::size_t k = config.kernel;
  const std::size_t time = x.seq_len();
  const std::size_t t_out = time - k + 1;
  for (const auto& step : x.steps) {
    if (step.rows() != batch || step.cols() != in_ch) {
      throw ShapeMismatch("input step shape does not match config");
    }
  }
  if (params.conv.w.size() != out_ch * in_ch * k || params.conv.b.size() != out_ch ||
      params.head.w.size() != out_ch) {
    throw ShapeMismatch("conv parameter shapes");
  }

  ConvCache<T> local;
  ConvCache<T>& c = cache ? *cache : local;

  // [batch, time, channels] windows transposed to [batch, channels, time].
  c.input = Tensor3<T>(batch, in_ch, time);
  for (std::size_t t = 0; t < time; ++t) {
    const Matrix<T>& step = x.steps[t];
    for (std::size_t b = 0; b < batch; ++b) {
      const T* row = step.row(b);
      for (std::size_t ch = 0; ch < in_ch; ++ch) c.input.at(b, ch, t) = row[ch];
    }
  }

  c.pre = Tensor3<T>(batch, out_ch, t_out);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oc = 0; oc < out_ch; ++oc) {
      T* out_slice = c.pre.slice(b, oc);
      const T* w_oc = params.conv.w.data() + oc * in_ch * k;
      for (std::size_t t = 0; t < t_out; ++t) out_slice[t] = params.conv.b[oc];
      for (std::size_t ic = 0; ic < in_ch; ++ic) {
        const T* in_slice = c.input.slice(b, ic);
        const T* w_ic = w_oc + ic * k;
        for (std::size_t t = 0; t < t_out; ++t) {
          T acc{};
          for (std::size_t kk = 0; kk < k; ++kk) acc += w_ic[kk] * in_slice[t + kk];
          out_slice[t] += acc;
        }
      }
    }
  }

  Tensor3<T> activated = c.pre;
  for (auto& v : activated.data) v = v > T{0} ? v : T{0};
  Matrix<T> pooled = mean_over_time(activated);

  detail::head_forward(pooled, params, /*use_dropout=*/false, training,
                       static_cast<Rng*>(nullptr), c.head);
  return c.head.probs;
}

template <typename T>
std::vector<T> model_forward(const BatchInput<T>& x, const ModelParams<T>& params,
                             bool training, Rng* rng, ModelCaches<T>* caches) {
  if (is_recurrent(params.config.kind)) {
    return recurrent_forward(x, params, training, rng,
                             caches ? &caches->recurrent : nullptr);
  }
  return conv1d_forward(x, params, training, caches ? &caches->conv : nullptr);
}

// ---------------------------------------------------------------------------
// Parameter construction
// ---------------------------------------------------------------------------

inline ParamCountBreakdown param_count_breakdown(const ModelConfig& config) {
  config.validate();
  ParamCountBreakdown out;
  const std::size_t hidden = config.hidden;
  if (is_recurrent(config.kind)) {
    const std::size_t gates = gate_count(config.kind);
    for (std::size_t l = 0; l < config.layers; ++l) {
      const std::size_t in = l == 0 ? config.input_size : hidden;
      out.backbone += gates * ((in + hidden) * hidden + 2 * hidden);
    }
  } else {
    out.backbone = hidden * config.input_size * config.kernel + hidden;
  }
  out.head = hidden + 1;
  out.total = out.backbone + out.head;
  return out;
}

inline std::size_t count_params(const ModelConfig& config) {
  return param_count_breakdown(config).total;
}

template <typename T>
ModelParams<T> zero_params(const ModelConfig& config) {
  config.validate();
  ModelParams<T> params;
  params.config = config;
  if (is_recurrent(config.kind)) {
    const std::size_t gates = gate_count(config.kind);
    params.layers.resize(config.layers);
    for (std::size_t l = 0; l < config.layers; ++l) {
      const std::size_t in = l == 0 ? config.input_size : config.hidden;
      params.layers[l].w = Matrix<T>(in + config.hidden, gates * config.hidden);
      params.layers[l].b_input.assign(gates * config.hidden, T{});
      params.layers[l].b_hidden.assign(gates * config.hidden, T{});
    }
  } else {
    params.conv.w.assign(
        static_cast<std::size_t>(config.hidden) * config.input_size * config.kernel,
        T{});
    params.conv.b.assign(config.hidden, T{});
  }
  params.head.w.assign(config.hidden, T{});
  params.head.b = T{};
  return params;
}

template <typename T>
ModelParams<T> zero_like(const ModelParams<T>& params) {
  return zero_params<T>(params.config);
}

template <typename T>
std::vector<ParamView<T>> param_views(ModelParams<T>& params) {
  std::vector<ParamView<T>> views;
  const ModelConfig& config = params.config;
  if (is_recurrent(config.kind)) {
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      auto& layer = params.layers[l];
      const std::string prefix = "layer" + std::to_string(l);
      views.push_back({prefix + ".w", layer.w.data().data(), layer.w.size(),
                       {static_cast<std::uint32_t>(layer.w.rows()),
                        static_cast<std::uint32_t>(layer.w.cols())}});
      views.push_back({prefix + ".b_input", layer.b_input.data(), layer.b_input.size(),
                       {static_cast<std::uint32_t>(layer.b_input.size())}});
      views.push_back({prefix + ".b_hidden", layer.b_hidden.data(),
                       layer.b_hidden.size(),
                       {static_cast<std::uint32_t>(layer.b_hidden.size())}});
    }
  } else {
    views.push_back({"conv.w", params.conv.w.data(), params.conv.w.size(),
                     {config.hidden, config.input_size, config.kernel}});
    views.push_back({"conv.b", params.conv.b.data(), params.conv.b.size(),
                     {config.hidden}});
  }
  views.push_back({"head.w", params.head.w.data(), params.head.w.size(),
                   {static_cast<std::uint32_t>(params.head.w.size())}});
  views.push_back({"head.b", &params.head.b, 1, {1}});
  return views;
}

template <typename T>
std::vector<ParamView<const T>> param_views(const ModelParams<T>& params) {
  auto mutable_views = param_views(const_cast<ModelParams<T>&>(params));
  std::vector<ParamView<const T>> views;
  views.reserve(mutable_views.size());
  for (auto& v : mutable_views) {
    views.push_back({std::move(v.name), v.data, v.size, std::move(v.dims)});
  }
  return views;
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams<T> params = zero_params<T>(config);
  Rng rng(Rng::derive(seed, 0x494e4954ULL));  // init stream
  const double recurrent_bound = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  const double conv_bound =
      1.0 / std::sqrt(static_cast<double>(config.input_size) * config.kernel);
  for (auto& view : param_views(params)) {
    const double bound =
        view.name.rfind("conv.", 0) == 0 ? conv_bound : recurrent_bound;
    for (std::size_t i = 0; i < view.size; ++i) {
      view.data[i] = static_cast<T>(rng.uniform(-bound, bound));
    }
  }
  return params;
}

template <typename T>
BatchInput<T> batch_from_windows(const std::vector<const Matrix<float>*>& features,
                                 std::size_t seq_len, std::size_t input_size) {
  BatchInput<T> input;
  input.steps.reserve(seq_len);
  for (std::size_t t = 0; t < seq_len; ++t) {
    Matrix<T> step(features.size(), input_size);
    for (std::size_t b = 0; b < features.size(); ++b) {
      const Matrix<float>& w = *features[b];
      if (w.rows() != seq_len || w.cols() != input_size) {
        throw ShapeMismatch("window shape does not match model config");
      }
      const float* src = w.row(t);
      T* dst = step.row(b);
      for (std::size_t j = 0; j < input_size; ++j) dst[j] = static_cast<T>(src[j]);
    }
    input.steps.push_back(std::move(step));
  }
  return input;
}

}  // namespace intentseq
