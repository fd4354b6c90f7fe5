// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Acoustic phoneme embedder: bidirectional GRU over standardized log-mel
// frames, final states of both directions concatenated, then linear + ReLU.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "phonefix/audio/mel.hpp"
#include "phonefix/corpus/corpus.hpp"
#include "phonefix/nn/checkpoint.hpp"
#include "phonefix/nn/gru.hpp"
#include "phonefix/nn/layers.hpp"

namespace phonefix {

struct SiameseConfig {
  int n_mels = 80;
  int hidden = 300;
  int embed_dim = 128;
  float norm_mean = 0.0f;
  float norm_std = 1.0f;

  void Validate() const {
    Require(n_mels >= 1 && hidden >= 1 && embed_dim >= 1, ErrorCode::kInvalidConfig,
            "siamese sizes must be positive");
    Require(std::isfinite(norm_mean) && std::isfinite(norm_std) && norm_std > 0,
            ErrorCode::kInvalidConfig, "bad normalization statistics");
  }
  bool operator==(const SiameseConfig&) const = default;
};

inline nlohmann::json SiameseConfigToJson(const SiameseConfig& c) {
  return {{"n_mels", c.n_mels},       {"hidden", c.hidden},     {"embed_dim", c.embed_dim},
          {"norm_mean", c.norm_mean}, {"norm_std", c.norm_std}};
}

inline SiameseConfig SiameseConfigFromJson(const nlohmann::json& j) {
  SiameseConfig c;
  try {
    c.n_mels = j.value("n_mels", c.n_mels);
    c.hidden = j.value("hidden", c.hidden);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.norm_mean = j.value("norm_mean", c.norm_mean);
    c.norm_std = j.value("norm_std", c.norm_std);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kInvalidConfig, std::string("siamese config: ") + e.what());
  }
  return c;
}

template <typename T>
struct SiameseParams {
  SiameseConfig cfg;
  nn::Gru<T> forward_gru;
  nn::Gru<T> backward_gru;
  nn::Conv1d<T> proj;  // 2*hidden -> embed_dim

  nn::TensorList<T> tensors() {
    nn::TensorList<T> t;
    forward_gru.AppendTensors("gru.fwd", t);
    backward_gru.AppendTensors("gru.bwd", t);
    proj.AppendTensors("proj", t);
    return t;
  }
};

template <typename T = float>
SiameseParams<T> InitSiamese(const SiameseConfig& cfg, std::uint64_t seed) {
  cfg.Validate();
  std::mt19937_64 rng(seed);
  SiameseParams<T> p;
  p.cfg = cfg;
  p.forward_gru.Init(cfg.n_mels, cfg.hidden, rng);
  p.backward_gru.Init(cfg.n_mels, cfg.hidden, rng);
  p.proj.Init(2 * cfg.hidden, cfg.embed_dim, 1, 1, rng);
  return p;
}

template <typename T>
struct SiameseCache {
  std::vector<Mat<T>> inputs;
  typename nn::Gru<T>::Cache fwd;
  typename nn::Gru<T>::Cache bwd;
  typename nn::Conv1d<T>::Cache proj;
  Mat<T> pre;
};

// Embeds each segment (rows = frames, raw log-mel). Returns batch x embed_dim.
template <typename T>
Mat<T> SiameseForward(const SiameseParams<T>& p, const std::vector<Mat<T>>& segments,
                      std::type_identity_t<SiameseCache<T>>* cache) {
  const auto& cfg = p.cfg;
  SiameseCache<T> local;
  SiameseCache<T>& c = cache ? *cache : local;
  c.inputs.clear();
  c.inputs.reserve(segments.size());
  const T mean = static_cast<T>(cfg.norm_mean);
  const T inv_std = static_cast<T>(1.0 / cfg.norm_std);
  for (const auto& s : segments) {
    Require(s.rows() >= 1, ErrorCode::kEmptySegment, "segment has no frames");
    Require(s.cols() == cfg.n_mels, ErrorCode::kShapeMismatch, "segment width");
    c.inputs.push_back(((s.array() - mean) * inv_std).matrix());
  }
  Require(!c.inputs.empty(), ErrorCode::kEmptySegment, "no segments");
  std::vector<const Mat<T>*> ptrs;
  for (const auto& m : c.inputs) ptrs.push_back(&m);
  const bool keep = cache != nullptr;
  Mat<T> hf = p.forward_gru.Forward(ptrs, false, keep ? &c.fwd : nullptr);
  Mat<T> hb = p.backward_gru.Forward(ptrs, true, keep ? &c.bwd : nullptr);
  Mat<T> pre = p.proj.Forward(nn::ConcatCols(hf, hb), static_cast<int>(ptrs.size()), 1,
                              keep ? &c.proj : nullptr);
  Mat<T> out = pre.cwiseMax(T(0));
  if (keep) c.pre = std::move(pre);
  return out;
}

// Returns gradients w.r.t. the raw input segments; parameter gradients are
// accumulated into grad when it is non-null.
template <typename T>
std::vector<Mat<T>> SiameseBackward(const SiameseParams<T>& p, const SiameseCache<T>& c,
                                    const Mat<T>& d_out, SiameseParams<T>* grad) {
  Mat<T> dpre = d_out;
  for (Eigen::Index i = 0; i < dpre.size(); ++i) {
    if (c.pre.data()[i] <= T(0)) dpre.data()[i] = T(0);
  }
  SiameseParams<T> scratch;
  SiameseParams<T>& g = grad ? *grad : scratch;
  if (!grad) scratch = nn::ZerosLike(p);
  Mat<T> dcat = p.proj.Backward(dpre, c.proj, g.proj);
  const int h = p.cfg.hidden;
  auto df = p.forward_gru.Backward(dcat.leftCols(h), c.fwd, g.forward_gru);
  auto db = p.backward_gru.Backward(dcat.rightCols(h), c.bwd, g.backward_gru);
  const T inv_std = static_cast<T>(1.0 / p.cfg.norm_std);
  for (std::size_t i = 0; i < df.size(); ++i) df[i] = (df[i] + db[i]) * inv_std;
  return df;
}

template <typename T>
RowVec<float> EmbedAcoustic(const SiameseParams<T>& p, const MatF& segment) {
  Require(segment.rows() >= 1, ErrorCode::kEmptySegment, "segment has no frames");
  Mat<T> out = SiameseForward<T>(p, {segment.cast<T>()}, nullptr);
  return out.row(0).template cast<float>();
}

struct Similarity {
  double value = 0.0;
  bool degenerate = false;  // one vector was all zeros
};

template <typename Derived1, typename Derived2>
Similarity CosineSimilarity(const Eigen::MatrixBase<Derived1>& u,
                            const Eigen::MatrixBase<Derived2>& v) {
  Require(u.size() == v.size(), ErrorCode::kShapeMismatch, "embedding sizes differ");
  const double nu = u.template cast<double>().norm();
  const double nv = v.template cast<double>().norm();
  if (nu == 0.0 || nv == 0.0) return {0.0, true};
  const double dot = u.template cast<double>().cwiseProduct(v.template cast<double>()).sum();
  return {std::clamp(dot / (nu * nv), -1.0, 1.0), false};
}

// Gradient of cos(u, v) w.r.t. u; zero when either vector is zero.
template <typename T>
RowVec<T> CosineGradU(const RowVec<T>& u, const RowVec<T>& v) {
  const T nu = u.norm();
  const T nv = v.norm();
  if (nu == T(0) || nv == T(0)) return RowVec<T>::Zero(u.size());
  const T cos = u.dot(v) / (nu * nv);
  return v / (nu * nv) - cos * u / (nu * nu);
}

struct SiameseModel {
  SiameseParams<float> params;
  PhonemeInventory inventory;
  MelConfig mel;
};

inline void SaveSiamese(const std::filesystem::path& dir, SiameseModel& model) {
  nlohmann::json config = {{"kind", "siamese"},
                           {"siamese", SiameseConfigToJson(model.params.cfg)},
                           {"inventory", InventoryToJson(model.inventory)},
                           {"mel", MelConfigToJson(model.mel)}};
  nn::SaveCheckpoint(dir, config, model.params.tensors());
}

inline SiameseModel LoadSiamese(const std::filesystem::path& dir) {
  const auto config = nn::LoadCheckpointConfig(dir);
  Require(config.value("kind", "") == "siamese", ErrorCode::kModelMissing,
          dir.string() + " is not a siamese checkpoint");
  SiameseModel model{InitSiamese<float>(SiameseConfigFromJson(config.at("siamese")), 0),
                     InventoryFromJson(config.at("inventory")),
                     MelConfigFromJson(config.at("mel"))};
  nn::LoadCheckpointWeights(dir, model.params.tensors());
  return model;
}

}  // namespace phonefix
