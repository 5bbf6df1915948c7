#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "intentseq/errors.hpp"

namespace intentseq {

/// Dense row-major matrix. Training and inference run on float; gradient
/// checking instantiates the same code with double.
template <typename T>
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, T{}) {}

  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeMismatch("matrix data length " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(rows_) + "x" +
                          std::to_string(cols_));
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  static Matrix filled(std::size_t rows, std::size_t cols, T value) {
    Matrix m(rows, cols);
    for (auto& v : m.data_) v = value;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

  const T* row(std::size_t i) const { return data_.data() + i * cols_; }
  T* row(std::size_t i) { return data_.data() + i * cols_; }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  bool all_finite() const {
    for (const T v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  /// Checked construction: rejects NaN/Inf entries. Used at data boundaries;
  /// the hot path constructs unchecked.
  static Matrix checked(std::size_t rows, std::size_t cols, std::vector<T> data) {
    Matrix m(rows, cols, std::move(data));
    if (!m.all_finite()) throw Error("matrix contains non-finite entries");
    return m;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Rank-3 activation block laid out [batch][channels][time].
template <typename T>
struct Tensor3 {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t time = 0;
  std::vector<T> data;

  Tensor3() = default;
  Tensor3(std::size_t b, std::size_t c, std::size_t t)
      : batch(b), channels(c), time(t), data(b * c * t, T{}) {}

  T at(std::size_t b, std::size_t c, std::size_t t) const {
    return data[(b * channels + c) * time + t];
  }
  T& at(std::size_t b, std::size_t c, std::size_t t) {
    return data[(b * channels + c) * time + t];
  }
  const T* slice(std::size_t b, std::size_t c) const {
    return data.data() + (b * channels + c) * time;
  }
  T* slice(std::size_t b, std::size_t c) {
    return data.data() + (b * channels + c) * time;
  }
};

namespace detail {
inline void require(bool cond, const char* what) {
  if (!cond) throw ShapeMismatch(what);
}
}  // namespace detail

/// Standard product. Accumulation over k runs in index order for every output
/// element, so each output row is independent of the rest of the batch.
template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeMismatch("matmul: " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " * " + std::to_string(b.rows()) +
                        "x" + std::to_string(b.cols()));
  }
  Matrix<T> out(a.rows(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), p = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    T* orow = out.row(i);
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T aik = a(i, kk);
      const T* brow = b.row(kk);
      for (std::size_t j = 0; j < p; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

/// a * b[:, c0:c1). Used for the GRU's per-gate column blocks.
template <typename T>
Matrix<T> matmul_cols(const Matrix<T>& a, const Matrix<T>& b, std::size_t c0,
                      std::size_t c1) {
  detail::require(a.cols() == b.rows() && c0 <= c1 && c1 <= b.cols(),
                  "matmul_cols: incompatible shapes");
  Matrix<T> out(a.rows(), c1 - c0);
  const std::size_t n = a.rows(), k = a.cols(), p = c1 - c0;
  for (std::size_t i = 0; i < n; ++i) {
    T* orow = out.row(i);
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T aik = a(i, kk);
      const T* brow = b.row(kk) + c0;
      for (std::size_t j = 0; j < p; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

/// dst[:, c0:c0+b.cols()) += a^T * b, with a [n x m], b [n x p].
template <typename T>
void add_outer_at_b(Matrix<T>& dst, const Matrix<T>& a, const Matrix<T>& b,
                    std::size_t c0 = 0) {
  detail::require(a.rows() == b.rows() && dst.rows() == a.cols() &&
                      c0 + b.cols() <= dst.cols(),
                  "add_outer_at_b: incompatible shapes");
  const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
  for (std::size_t r = 0; r < n; ++r) {
    const T* arow = a.row(r);
    const T* brow = b.row(r);
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      T* drow = dst.row(i) + c0;
      for (std::size_t j = 0; j < p; ++j) drow[j] += av * brow[j];
    }
  }
}

/// dst += a * (w[:, c0:c1))^T, with a [n x (c1-c0)], w [r x C], dst [n x r].
template <typename T>
void add_matmul_bt_cols(Matrix<T>& dst, const Matrix<T>& a, const Matrix<T>& w,
                        std::size_t c0, std::size_t c1) {
  detail::require(a.cols() == c1 - c0 && c1 <= w.cols() && dst.rows() == a.rows() &&
                      dst.cols() == w.rows(),
                  "add_matmul_bt_cols: incompatible shapes");
  const std::size_t n = a.rows(), p = c1 - c0, r = w.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const T* arow = a.row(i);
    T* drow = dst.row(i);
    for (std::size_t rr = 0; rr < r; ++rr) {
      const T* wrow = w.row(rr) + c0;
      T s{};
      for (std::size_t j = 0; j < p; ++j) s += arow[j] * wrow[j];
      drow[rr] += s;
    }
  }
}

template <typename T>
Matrix<T> hadamard(const Matrix<T>& a, const Matrix<T>& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(),
                  "hadamard: shape mismatch");
  Matrix<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

template <typename T>
Matrix<T> add(const Matrix<T>& a, const Matrix<T>& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  Matrix<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  return out;
}

template <typename T>
void add_inplace(Matrix<T>& a, const Matrix<T>& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(),
                  "add_inplace: shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

/// Numerically stable logistic function; saturates instead of overflowing.
template <typename T>
T sigmoid_scalar(T x) {
  if (x >= T{0}) {
    return T{1} / (T{1} + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
Matrix<T> sigmoid(const Matrix<T>& x) {
  Matrix<T> out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = sigmoid_scalar(x.data()[i]);
  return out;
}

template <typename T>
Matrix<T> tanh(const Matrix<T>& x) {
  Matrix<T> out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = std::tanh(x.data()[i]);
  return out;
}

template <typename T>
Matrix<T> relu(const Matrix<T>& x) {
  Matrix<T> out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i)
    out.data()[i] = x.data()[i] > T{0} ? x.data()[i] : T{0};
  return out;
}

/// Horizontal concatenation [h | x]; realizes the [h_{t-1}, x_t] blocks.
template <typename T>
Matrix<T> concat_rows(const Matrix<T>& h, const Matrix<T>& x) {
  detail::require(h.rows() == x.rows(), "concat_rows: batch mismatch");
  Matrix<T> out(h.rows(), h.cols() + x.cols());
  for (std::size_t i = 0; i < h.rows(); ++i) {
    T* orow = out.row(i);
    const T* hrow = h.row(i);
    for (std::size_t j = 0; j < h.cols(); ++j) orow[j] = hrow[j];
    const T* xrow = x.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) orow[h.cols() + j] = xrow[j];
  }
  return out;
}

template <typename T>
Matrix<T> slice_cols(const Matrix<T>& m, std::size_t c0, std::size_t c1) {
  detail::require(c0 <= c1 && c1 <= m.cols(), "slice_cols: out of range");
  Matrix<T> out(m.rows(), c1 - c0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const T* src = m.row(i) + c0;
    T* dst = out.row(i);
    for (std::size_t j = 0; j < c1 - c0; ++j) dst[j] = src[j];
  }
  return out;
}

template <typename T>
std::vector<T> col_sums(const Matrix<T>& m) {
  std::vector<T> out(m.cols(), T{});
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const T* row = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += row[j];
  }
  return out;
}

/// Adds v to every row of m.
template <typename T>
void add_row_vector(Matrix<T>& m, const std::vector<T>& v) {
  detail::require(m.cols() == v.size(), "add_row_vector: width mismatch");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    T* row = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) row[j] += v[j];
  }
}

/// Global average pooling: arithmetic mean over the time axis.
template <typename T>
Matrix<T> mean_over_time(const Tensor3<T>& x) {
  if (x.time == 0) throw EmptyTimeAxis("mean_over_time: empty time axis");
  Matrix<T> out(x.batch, x.channels);
  for (std::size_t b = 0; b < x.batch; ++b) {
    for (std::size_t c = 0; c < x.channels; ++c) {
      const T* s = x.slice(b, c);
      T acc{};
      for (std::size_t t = 0; t < x.time; ++t) acc += s[t];
      out(b, c) = acc / static_cast<T>(x.time);
    }
  }
  return out;
}

using MatrixF = Matrix<float>;
using MatrixD = Matrix<double>;

}  // namespace intentseq
