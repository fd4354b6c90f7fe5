// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Minimal layers with hand-written backward passes. A batch of equal-length
// sequences is stored as one matrix: `batch * length` rows, channels as columns.
// Every backward accumulates parameter gradients into a grad struct of the same
// shape as the parameters.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "phonefix/error.hpp"
#include "phonefix/types.hpp"

namespace phonefix::nn {

template <typename T>
using TensorList = std::vector<std::pair<std::string, Mat<T>*>>;

template <typename T>
using ConstTensorList = std::vector<std::pair<std::string, const Mat<T>*>>;

// Portable draws so initialization does not depend on the standard library's
// distribution implementations.
inline double UniformUnit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double UniformRange(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * UniformUnit(rng);
}

inline double StandardNormal(std::mt19937_64& rng) {
  double u1 = UniformUnit(rng);
  while (u1 <= 0.0) u1 = UniformUnit(rng);
  const double u2 = UniformUnit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

template <typename T>
void FillUniform(Mat<T>& m, double bound, std::mt19937_64& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<T>(UniformRange(rng, -bound, bound));
  }
}

template <typename T>
void ZeroAll(const TensorList<T>& tensors) {
  for (auto& [name, m] : tensors) m->setZero();
}

template <typename T>
bool AllFinite(const TensorList<T>& tensors) {
  for (auto& [name, m] : tensors) {
    if (!m->allFinite()) return false;
  }
  return true;
}

template <typename Dst, typename Src>
void CastInto(Mat<Dst>& dst, const Mat<Src>& src) {
  dst = src.template cast<Dst>();
}

// Copies tensors between lists with identical names and shapes (any scalar).
template <typename Dst, typename Src>
void CopyTensors(const TensorList<Dst>& dst, const TensorList<Src>& src) {
  Require(dst.size() == src.size(), ErrorCode::kShapeMismatch, "tensor count differs");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    Require(dst[i].first == src[i].first && dst[i].second->rows() == src[i].second->rows() &&
                dst[i].second->cols() == src[i].second->cols(),
            ErrorCode::kShapeMismatch, "tensor mismatch at " + dst[i].first);
    *dst[i].second = src[i].second->template cast<Dst>();
  }
}

inline int ConvOutLength(int length, int k, int stride) {
  const int pad = (k - 1) / 2;
  return (length + 2 * pad - k) / stride + 1;
}

// Rows of the result are output positions; columns are [tap 0 channels, tap 1 ...].
template <typename T>
Mat<T> Im2Col(const Mat<T>& x, int batch, int length, int k, int stride) {
  const int cin = static_cast<int>(x.cols());
  const int pad = (k - 1) / 2;
  const int out_len = ConvOutLength(length, k, stride);
  Mat<T> cols = Mat<T>::Zero(static_cast<Eigen::Index>(batch) * out_len,
                             static_cast<Eigen::Index>(k) * cin);
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < out_len; ++t) {
      const Eigen::Index row = static_cast<Eigen::Index>(b) * out_len + t;
      for (int j = 0; j < k; ++j) {
        const int src = t * stride + j - pad;
        if (src < 0 || src >= length) continue;
        cols.row(row).segment(static_cast<Eigen::Index>(j) * cin, cin) =
            x.row(static_cast<Eigen::Index>(b) * length + src);
      }
    }
  }
  return cols;
}

template <typename T>
Mat<T> Col2Im(const Mat<T>& dcols, int batch, int length, int cin, int k, int stride) {
  const int pad = (k - 1) / 2;
  const int out_len = ConvOutLength(length, k, stride);
  Mat<T> dx = Mat<T>::Zero(static_cast<Eigen::Index>(batch) * length, cin);
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < out_len; ++t) {
      const Eigen::Index row = static_cast<Eigen::Index>(b) * out_len + t;
      for (int j = 0; j < k; ++j) {
        const int src = t * stride + j - pad;
        if (src < 0 || src >= length) continue;
        dx.row(static_cast<Eigen::Index>(b) * length + src) +=
            dcols.row(row).segment(static_cast<Eigen::Index>(j) * cin, cin);
      }
    }
  }
  return dx;
}

// 1-D convolution with "same" padding (k - 1) / 2 and an optional stride.
template <typename T>
struct Conv1d {
  int cin = 0;
  int cout = 0;
  int k = 1;
  int stride = 1;
  Mat<T> w;  // (k * cin) x cout
  Mat<T> b;  // 1 x cout

  struct Cache {
    Mat<T> cols;
    int batch = 0;
    int length = 0;
  };

  void Init(int in, int out, int kernel, int step, std::mt19937_64& rng) {
    Require(in > 0 && out > 0 && kernel > 0 && kernel % 2 == 1 && step > 0,
            ErrorCode::kInvalidConfig, "bad conv shape");
    cin = in;
    cout = out;
    k = kernel;
    stride = step;
    w.resize(static_cast<Eigen::Index>(k) * cin, cout);
    b.resize(1, cout);
    const double bound = 1.0 / std::sqrt(static_cast<double>(k) * cin);
    FillUniform(w, bound, rng);
    FillUniform(b, bound, rng);
  }

  int OutLength(int length) const { return ConvOutLength(length, k, stride); }

  Mat<T> Forward(const Mat<T>& x, int batch, int length, Cache* cache) const {
    Require(x.cols() == cin && x.rows() == static_cast<Eigen::Index>(batch) * length,
            ErrorCode::kShapeMismatch, "conv input shape");
    Mat<T> y;
    if (k == 1 && stride == 1) {
      y.noalias() = x * w;
      if (cache) cache->cols = x;
    } else {
      Mat<T> cols = Im2Col(x, batch, length, k, stride);
      y.noalias() = cols * w;
      if (cache) cache->cols = std::move(cols);
    }
    y.rowwise() += b.row(0);
    if (cache) {
      cache->batch = batch;
      cache->length = length;
    }
    return y;
  }

  Mat<T> Backward(const Mat<T>& dy, const Cache& cache, Conv1d& grad) const {
    grad.w.noalias() += cache.cols.transpose() * dy;
    grad.b += dy.colwise().sum();
    Mat<T> dcols;
    dcols.noalias() = dy * w.transpose();
    if (k == 1 && stride == 1) return dcols;
    return Col2Im(dcols, cache.batch, cache.length, cin, k, stride);
  }

  void AppendTensors(const std::string& prefix, TensorList<T>& out) {
    out.emplace_back(prefix + ".w", &w);
    out.emplace_back(prefix + ".b", &b);
  }
};

// Per-channel parametric ReLU.
template <typename T>
struct PRelu {
  Mat<T> a;  // 1 x channels

  void Init(int channels, double slope = 0.25) {
    a = Mat<T>::Constant(1, channels, static_cast<T>(slope));
  }

  Mat<T> Forward(const Mat<T>& x) const {
    Require(x.cols() == a.cols(), ErrorCode::kShapeMismatch, "prelu channels");
    Mat<T> y = x;
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      for (Eigen::Index c = 0; c < y.cols(); ++c) {
        T& v = y(r, c);
        if (v <= T(0)) v *= a(0, c);
      }
    }
    return y;
  }

  Mat<T> Backward(const Mat<T>& dy, const Mat<T>& x, PRelu& grad) const {
    Mat<T> dx = dy;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (x(r, c) <= T(0)) {
          grad.a(0, c) += x(r, c) * dy(r, c);
          dx(r, c) *= a(0, c);
        }
      }
    }
    return dx;
  }

  void AppendTensors(const std::string& prefix, TensorList<T>& out) {
    out.emplace_back(prefix + ".a", &a);
  }
};

// Zero-stuffing x2 upsampler; followed by a conv it is a transposed convolution.
template <typename T>
Mat<T> ZeroStuff2(const Mat<T>& x, int batch, int length) {
  Mat<T> y = Mat<T>::Zero(x.rows() * 2, x.cols());
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < length; ++t) {
      y.row(static_cast<Eigen::Index>(b) * 2 * length + 2 * t) =
          x.row(static_cast<Eigen::Index>(b) * length + t);
    }
  }
  return y;
}

template <typename T>
Mat<T> ZeroStuff2Backward(const Mat<T>& dy, int batch, int length) {
  Mat<T> dx(static_cast<Eigen::Index>(batch) * length, dy.cols());
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < length; ++t) {
      dx.row(static_cast<Eigen::Index>(b) * length + t) =
          dy.row(static_cast<Eigen::Index>(b) * 2 * length + 2 * t);
    }
  }
  return dx;
}

template <typename T>
Mat<T> ConcatCols(const Mat<T>& a, const Mat<T>& b) {
  Require(a.rows() == b.rows(), ErrorCode::kShapeMismatch, "concat rows");
  Mat<T> out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

// Lookup table; rows are symbols.
template <typename T>
struct Embedding {
  Mat<T> table;

  void Init(int symbols, int dim, std::mt19937_64& rng) {
    Require(symbols > 0 && dim > 0, ErrorCode::kInvalidConfig, "bad embedding shape");
    table.resize(symbols, dim);
    for (Eigen::Index i = 0; i < table.size(); ++i) {
      table.data()[i] = static_cast<T>(StandardNormal(rng));
    }
  }

  Mat<T> Forward(const std::vector<int>& ids) const {
    Mat<T> out(static_cast<Eigen::Index>(ids.size()), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      Require(ids[i] >= 0 && ids[i] < table.rows(), ErrorCode::kInvalidPhoneme,
              "symbol id out of range");
      out.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
    }
    return out;
  }

  void Backward(const Mat<T>& dy, const std::vector<int>& ids, Embedding& grad) const {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      grad.table.row(ids[i]) += dy.row(static_cast<Eigen::Index>(i));
    }
  }

  void AppendTensors(const std::string& prefix, TensorList<T>& out) {
    out.emplace_back(prefix + ".table", &table);
  }
};

// Params type P must expose tensors(); returns a same-shaped zeroed copy.
template <typename P>
P ZerosLike(const P& params) {
  P out = params;
  ZeroAll(out.tensors());
  return out;
}

template <typename T>
double GlobalNorm(const TensorList<T>& tensors) {
  double s = 0.0;
  for (auto& [name, m] : tensors) s += m->template cast<double>().squaredNorm();
  return std::sqrt(s);
}

}  // namespace phonefix::nn
