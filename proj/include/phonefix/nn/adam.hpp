// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <vector>

#include "phonefix/nn/layers.hpp"

namespace phonefix::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void Step(const TensorList<T>& params, const TensorList<T>& grads) {
    Require(params.size() == grads.size(), ErrorCode::kShapeMismatch, "param/grad count");
    if (m_.empty()) {
      for (auto& [name, p] : params) {
        m_.push_back(Mat<T>::Zero(p->rows(), p->cols()));
        v_.push_back(Mat<T>::Zero(p->rows(), p->cols()));
      }
    }
    ++step_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, step_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, step_);
    const T b1 = static_cast<T>(cfg_.beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    const T step_size = static_cast<T>(cfg_.learning_rate / c1);
    const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
    const T eps = static_cast<T>(cfg_.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto g = grads[i].second->array();
      auto m = m_[i].array();
      auto v = v_[i].array();
      m = b1 * m + (T(1) - b1) * g;
      v = b2 * v + (T(1) - b2) * g.square();
      params[i].second->array() -= step_size * m / (v.sqrt() * inv_sqrt_c2 + eps);
    }
  }

  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }
  int steps() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  int step_ = 0;
  std::vector<Mat<T>> m_;
  std::vector<Mat<T>> v_;
};

}  // namespace phonefix::nn
