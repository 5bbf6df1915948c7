#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "intentseq/model.hpp"

namespace intentseq {

// Hand-derived backward passes. The contract is checked end to end against
// central finite differences (see gradcheck.hpp and the test suites); the
// clamp below mirrors bce_loss so saturated probabilities keep a bounded,
// consistent gradient.

namespace detail {

template <typename T>
T clamp_prob(T p, double eps) {
  const double v = std::min(std::max(static_cast<double>(p), eps), 1.0 - eps);
  return static_cast<T>(v);
}

/// Head backward: given dL/dp, produce parameter grads and dL/d(head input
/// before dropout).
template <typename T>
Matrix<T> head_backward(const HeadCache<T>& head, const ModelParams<T>& params,
                        std::span<const T> dloss_dp, double clamp_eps,
                        ModelParams<T>& grads) {
  const std::size_t batch = head.probs.size();
  if (dloss_dp.size() != batch) {
    throw ShapeMismatch("gradient length does not match batch");
  }
  std::vector<T> du(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const T p = clamp_prob(head.probs[b], clamp_eps);
    du[b] = dloss_dp[b] * p * (T{1} - p);
  }

  const std::size_t width = params.head.w.size();
  Matrix<T> dinput(batch, width);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* in = head.input.row(b);
    T* drow = dinput.row(b);
    for (std::size_t j = 0; j < width; ++j) {
      grads.head.w[j] += du[b] * in[j];
      drow[j] = du[b] * params.head.w[j];
    }
    grads.head.b += du[b];
  }

  if (!head.dropout_mask.empty()) {
    for (std::size_t idx = 0; idx < dinput.size(); ++idx) {
      dinput.data()[idx] *= head.dropout_mask.data()[idx];
    }
  }
  return dinput;
}

/// BPTT through one LSTM layer. `inject[t]` carries dL/dh_t arriving from
/// above (the layer on top, or the head at the final step); returns dL/dx_t
/// per step when `dx` is non-null.
template <typename T>
void lstm_layer_backward(const std::vector<LstmStepCache<T>>& steps,
                         const RecurrentLayerParams<T>& p,
                         const std::vector<Matrix<T>>& inject,
                         RecurrentLayerParams<T>& grads, std::vector<Matrix<T>>* dx) {
  const std::size_t seq = steps.size();
  const std::size_t batch = steps[0].h.rows();
  const std::size_t hidden = steps[0].h.cols();
  const std::size_t in = steps[0].concat.cols() - hidden;

  Matrix<T> dh_rec(batch, hidden);
  Matrix<T> dc_rec(batch, hidden);
  if (dx) dx->assign(seq, Matrix<T>());

  for (std::size_t t = seq; t-- > 0;) {
    const LstmStepCache<T>& s = steps[t];
    Matrix<T> dpre(batch, 4 * hidden);
    for (std::size_t b = 0; b < batch; ++b) {
      const T* inj = inject[t].empty() ? nullptr : inject[t].row(b);
      const T* dhr = dh_rec.row(b);
      const T* dcr = dc_rec.row(b);
      const T* f = s.f.row(b);
      const T* i = s.i.row(b);
      const T* g = s.g.row(b);
      const T* o = s.o.row(b);
      const T* cp = s.c_prev.row(b);
      const T* tc = s.tanh_c.row(b);
      T* dp = dpre.row(b);
      T* dcr_out = dc_rec.row(b);
      for (std::size_t j = 0; j < hidden; ++j) {
        const T dh = (inj ? inj[j] : T{0}) + dhr[j];
        const T do_ = dh * tc[j];
        const T dc = dcr[j] + dh * o[j] * (T{1} - tc[j] * tc[j]);
        const T df = dc * cp[j];
        const T di = dc * g[j];
        const T dg = dc * i[j];
        dp[j] = df * f[j] * (T{1} - f[j]);
        dp[hidden + j] = di * i[j] * (T{1} - i[j]);
        dp[2 * hidden + j] = dg * (T{1} - g[j] * g[j]);
        dp[3 * hidden + j] = do_ * o[j] * (T{1} - o[j]);
        dcr_out[j] = dc * f[j];  // flows to t-1
      }
    }

    add_outer_at_b(grads.w, s.concat, dpre, 0);
    const std::vector<T> db = col_sums(dpre);
    for (std::size_t j = 0; j < db.size(); ++j) {
      grads.b_input[j] += db[j];
      grads.b_hidden[j] += db[j];
    }

    Matrix<T> dconcat(batch, hidden + in);
    add_matmul_bt_cols(dconcat, dpre, p.w, 0, 4 * hidden);
    dh_rec = slice_cols(dconcat, 0, hidden);
    if (dx) (*dx)[t] = slice_cols(dconcat, hidden, hidden + in);
  }
}

/// BPTT through one GRU layer (reset-before-matmul form).
template <typename T>
void gru_layer_backward(const std::vector<GruStepCache<T>>& steps,
                        const RecurrentLayerParams<T>& p,
                        const std::vector<Matrix<T>>& inject,
                        RecurrentLayerParams<T>& grads, std::vector<Matrix<T>>* dx) {
  const std::size_t seq = steps.size();
  const std::size_t batch = steps[0].h.rows();
  const std::size_t hidden = steps[0].h.cols();
  const std::size_t in = steps[0].concat.cols() - hidden;

  Matrix<T> dh_rec(batch, hidden);
  if (dx) dx->assign(seq, Matrix<T>());

  for (std::size_t t = seq; t-- > 0;) {
    const GruStepCache<T>& s = steps[t];

    // h_t = (1-z)*g + z*h_prev
    Matrix<T> dpre_g(batch, hidden);
    Matrix<T> dzg(batch, hidden);     // dL/dz before sigmoid chain
    Matrix<T> dh_prev(batch, hidden);  // accumulates all h_{t-1} paths
    for (std::size_t b = 0; b < batch; ++b) {
      const T* inj = inject[t].empty() ? nullptr : inject[t].row(b);
      const T* dhr = dh_rec.row(b);
      const T* z = s.z.row(b);
      const T* g = s.g.row(b);
      const T* hp = s.h_prev.row(b);
      T* dpg = dpre_g.row(b);
      T* dz = dzg.row(b);
      T* dhp = dh_prev.row(b);
      for (std::size_t j = 0; j < hidden; ++j) {
        const T dh = (inj ? inj[j] : T{0}) + dhr[j];
        const T dg = dh * (T{1} - z[j]);
        dz[j] = dh * (hp[j] - g[j]);
        dhp[j] = dh * z[j];
        dpg[j] = dg * (T{1} - g[j] * g[j]);
      }
    }

    // Candidate block: inputs were [r*h_prev, x].
    add_outer_at_b(grads.w, s.concat_reset, dpre_g, 2 * hidden);
    const std::vector<T> dbg = col_sums(dpre_g);
    for (std::size_t j = 0; j < hidden; ++j) {
      grads.b_input[2 * hidden + j] += dbg[j];
      grads.b_hidden[2 * hidden + j] += dbg[j];
    }
    Matrix<T> dconcat_reset(batch, hidden + in);
    add_matmul_bt_cols(dconcat_reset, dpre_g, p.w, 2 * hidden, 3 * hidden);

    // Reset gate chain: d(r*h_prev) splits into dr and a h_prev path.
    Matrix<T> dpre_rz(batch, 2 * hidden);
    for (std::size_t b = 0; b < batch; ++b) {
      const T* drh = dconcat_reset.row(b);
      const T* r = s.r.row(b);
      const T* z = s.z.row(b);
      const T* hp = s.h_prev.row(b);
      const T* dz = dzg.row(b);
      T* dhp = dh_prev.row(b);
      T* dprz = dpre_rz.row(b);
      for (std::size_t j = 0; j < hidden; ++j) {
        const T dr = drh[j] * hp[j];
        dhp[j] += drh[j] * r[j];
        dprz[j] = dr * r[j] * (T{1} - r[j]);
        dprz[hidden + j] = dz[j] * z[j] * (T{1} - z[j]);
      }
    }

    add_outer_at_b(grads.w, s.concat, dpre_rz, 0);
    const std::vector<T> dbrz = col_sums(dpre_rz);
    for (std::size_t j = 0; j < 2 * hidden; ++j) {
      grads.b_input[j] += dbrz[j];
      grads.b_hidden[j] += dbrz[j];
    }

    Matrix<T> dconcat(batch, hidden + in);
    add_matmul_bt_cols(dconcat, dpre_rz, p.w, 0, 2 * hidden);

    for (std::size_t b = 0; b < batch; ++b) {
      const T* dc = dconcat.row(b);
      T* dhp = dh_prev.row(b);
      for (std::size_t j = 0; j < hidden; ++j) dhp[j] += dc[j];
    }
    if (dx) {
      Matrix<T> dxt(batch, in);
      for (std::size_t b = 0; b < batch; ++b) {
        const T* dcr = dconcat_reset.row(b) + hidden;
        const T* dcc = dconcat.row(b) + hidden;
        T* out = dxt.row(b);
        for (std::size_t j = 0; j < in; ++j) out[j] = dcr[j] + dcc[j];
      }
      (*dx)[t] = std::move(dxt);
    }
    dh_rec = std::move(dh_prev);
  }
}

}  // namespace detail

/// Full-model backward from dL/dp (as produced by bce_loss). Returns grads
/// with the same shapes as the parameters.
template <typename T>
ModelParams<T> model_backward(const ModelParams<T>& params, const ModelCaches<T>& caches,
                              std::span<const T> dloss_dp, double clamp_eps = 1e-7) {
  ModelParams<T> grads = zero_like(params);
  const ModelConfig& config = params.config;

  if (is_recurrent(config.kind)) {
    const RecurrentCache<T>& cache = caches.recurrent;
    Matrix<T> dtop = detail::head_backward(cache.head, params, dloss_dp, clamp_eps, grads);

    const std::size_t seq = config.kind == ModelKind::lstm ? cache.lstm[0].size()
                                                           : cache.gru[0].size();
    // dL/dh_t arriving from above; for the top layer only the last step gets
    // a head contribution.
    std::vector<Matrix<T>> inject(seq);
    inject[seq - 1] = std::move(dtop);

    for (std::size_t l = config.layers; l-- > 0;) {
      std::vector<Matrix<T>> dx;
      const bool need_dx = l > 0;
      if (config.kind == ModelKind::lstm) {
        detail::lstm_layer_backward(cache.lstm[l], params.layers[l], inject,
                                    grads.layers[l], need_dx ? &dx : nullptr);
      } else {
        detail::gru_layer_backward(cache.gru[l], params.layers[l], inject,
                                   grads.layers[l], need_dx ? &dx : nullptr);
      }
      if (need_dx) inject = std::move(dx);
    }
    return grads;
  }

  // cnn1d: head -> global average pooling -> ReLU -> correlation weights.
  const ConvCache<T>& cache = caches.conv;
  Matrix<T> dpooled = detail::head_backward(cache.head, params, dloss_dp, clamp_eps, grads);

  const std::size_t batch = cache.pre.batch;
  const std::size_t out_ch = cache.pre.channels;
  const std::size_t t_out = cache.pre.time;
  const std::size_t in_ch = cache.input.channels;
  const std::size_t k = config.kernel;
  const T inv_t = T{1} / static_cast<T>(t_out);

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oc = 0; oc < out_ch; ++oc) {
      const T scale = dpooled(b, oc) * inv_t;
      const T* pre = cache.pre.slice(b, oc);
      T* dw_oc = grads.conv.w.data() + oc * in_ch * k;
      for (std::size_t t = 0; t < t_out; ++t) {
        if (pre[t] <= T{0}) continue;  // ReLU gate
        grads.conv.b[oc] += scale;
        for (std::size_t ic = 0; ic < in_ch; ++ic) {
          const T* in_slice = cache.input.slice(b, ic) + t;
          T* dw_ic = dw_oc + ic * k;
          for (std::size_t kk = 0; kk < k; ++kk) dw_ic[kk] += scale * in_slice[kk];
        }
      }
    }
  }
  return grads;
}

}  // namespace intentseq
