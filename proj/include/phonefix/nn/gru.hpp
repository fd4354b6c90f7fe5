// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Single-direction GRU over a batch of variable-length sequences, gate order
// (r, z, n):
//   r = sigmoid(x Wi_r + bi_r + h Wh_r + bh_r)
//   z = sigmoid(x Wi_z + bi_z + h Wh_z + bh_z)
//   n = tanh(x Wi_n + bi_n + r * (h Wh_n + bh_n))
//   h' = (1 - z) * n + z * h
// Rows whose sequence has ended keep their state, so the returned state of each
// row is the state after its own last frame.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "phonefix/nn/layers.hpp"

namespace phonefix::nn {

template <typename T>
Mat<T> Sigmoid(const Mat<T>& a) {
  return (T(1) + (-a.array()).exp()).inverse().matrix();
}

template <typename T>
struct Gru {
  int din = 0;
  int hidden = 0;
  Mat<T> wi;  // din x 3h
  Mat<T> bi;  // 1 x 3h
  Mat<T> wh;  // h x 3h
  Mat<T> bh;  // 1 x 3h

  struct Step {
    Mat<T> x;
    Mat<T> h_prev;
    Mat<T> r;
    Mat<T> z;
    Mat<T> n;
    Mat<T> ghn;
    std::vector<char> active;
  };
  struct Cache {
    std::vector<Step> steps;
    std::vector<int> lengths;
    bool reverse = false;
  };

  void Init(int in, int h, std::mt19937_64& rng) {
    Require(in > 0 && h > 0, ErrorCode::kInvalidConfig, "bad GRU shape");
    din = in;
    hidden = h;
    wi.resize(din, 3 * h);
    bi.resize(1, 3 * h);
    wh.resize(h, 3 * h);
    bh.resize(1, 3 * h);
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    FillUniform(wi, bound, rng);
    FillUniform(wh, bound, rng);
    FillUniform(bi, bound, rng);
    FillUniform(bh, bound, rng);
  }

  // Frame index of step t within a sequence of length len.
  static int FrameAt(int t, int len, bool reverse) { return reverse ? len - 1 - t : t; }

  Mat<T> Forward(const std::vector<const Mat<T>*>& seqs, bool reverse, Cache* cache) const {
    const int batch = static_cast<int>(seqs.size());
    int t_max = 0;
    std::vector<int> lengths(batch);
    for (int b = 0; b < batch; ++b) {
      Require(seqs[b]->cols() == din, ErrorCode::kShapeMismatch, "GRU input width");
      lengths[b] = static_cast<int>(seqs[b]->rows());
      t_max = std::max(t_max, lengths[b]);
    }
    const int h = hidden;
    Mat<T> state = Mat<T>::Zero(batch, h);
    if (cache) {
      cache->steps.clear();
      cache->steps.reserve(t_max);
      cache->lengths = lengths;
      cache->reverse = reverse;
    }
    Mat<T> x(batch, din);
    for (int t = 0; t < t_max; ++t) {
      std::vector<char> active(batch);
      x.setZero();
      for (int b = 0; b < batch; ++b) {
        active[b] = t < lengths[b];
        if (active[b]) x.row(b) = seqs[b]->row(FrameAt(t, lengths[b], reverse));
      }
      Mat<T> gi = x * wi;
      gi.rowwise() += bi.row(0);
      Mat<T> gh = state * wh;
      gh.rowwise() += bh.row(0);
      Mat<T> r = Sigmoid<T>(gi.leftCols(h) + gh.leftCols(h));
      Mat<T> z = Sigmoid<T>(gi.middleCols(h, h) + gh.middleCols(h, h));
      Mat<T> ghn = gh.rightCols(h);
      Mat<T> n = (gi.rightCols(h).array() + r.array() * ghn.array()).tanh().matrix();
      Mat<T> next = ((T(1) - z.array()) * n.array() + z.array() * state.array()).matrix();
      if (cache) {
        cache->steps.push_back(Step{x, state, r, z, n, ghn, active});
      }
      for (int b = 0; b < batch; ++b) {
        if (active[b]) state.row(b) = next.row(b);
      }
    }
    return state;
  }

  // d_final: gradient w.r.t. the returned states. Returns gradients w.r.t. each
  // input sequence (same shapes as the inputs).
  std::vector<Mat<T>> Backward(const Mat<T>& d_final, const Cache& cache, Gru& grad) const {
    const int batch = static_cast<int>(cache.lengths.size());
    const int h = hidden;
    std::vector<Mat<T>> dx(batch);
    for (int b = 0; b < batch; ++b) dx[b] = Mat<T>::Zero(cache.lengths[b], din);
    Mat<T> dh = d_final;
    for (int t = static_cast<int>(cache.steps.size()) - 1; t >= 0; --t) {
      const Step& s = cache.steps[t];
      Mat<T> dnext = dh;
      Mat<T> dh_prev = dh;
      for (int b = 0; b < batch; ++b) {
        if (s.active[b]) {
          dh_prev.row(b).setZero();
        } else {
          dnext.row(b).setZero();
        }
      }
      const auto one = T(1);
      Mat<T> dn = (dnext.array() * (one - s.z.array())).matrix();
      Mat<T> dz = (dnext.array() * (s.h_prev.array() - s.n.array())).matrix();
      dh_prev.array() += dnext.array() * s.z.array();
      Mat<T> dan = (dn.array() * (one - s.n.array().square())).matrix();
      Mat<T> dr = (dan.array() * s.ghn.array()).matrix();
      Mat<T> daz = (dz.array() * s.z.array() * (one - s.z.array())).matrix();
      Mat<T> dar = (dr.array() * s.r.array() * (one - s.r.array())).matrix();
      Mat<T> dgi(batch, 3 * h);
      dgi << dar, daz, dan;
      Mat<T> dgh(batch, 3 * h);
      dgh << dar, daz, (dan.array() * s.r.array()).matrix();
      grad.wi.noalias() += s.x.transpose() * dgi;
      grad.bi += dgi.colwise().sum();
      grad.wh.noalias() += s.h_prev.transpose() * dgh;
      grad.bh += dgh.colwise().sum();
      dh_prev.noalias() += dgh * wh.transpose();
      Mat<T> dxt = dgi * wi.transpose();
      for (int b = 0; b < batch; ++b) {
        if (s.active[b]) dx[b].row(FrameAt(t, cache.lengths[b], cache.reverse)) += dxt.row(b);
      }
      dh = std::move(dh_prev);
    }
    return dx;
  }

  void AppendTensors(const std::string& prefix, TensorList<T>& out) {
    out.emplace_back(prefix + ".wi", &wi);
    out.emplace_back(prefix + ".bi", &bi);
    out.emplace_back(prefix + ".wh", &wh);
    out.emplace_back(prefix + ".bh", &bh);
  }
};

}  // namespace phonefix::nn
