// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Phoneme-conditioned 1-D U-net over a tau-frame mel window.
//
//   in  = [ (masked - mean) / std , embed(label) ]            tau
//   e1 k3      -> w0                                          tau     (skip)
//   e2 k3 s2   -> w1                                          tau/2
//   e3 k3      -> w2                                          tau/2   (skip)
//   e4 k3 s2   -> w3                                          tau/4
//   e5 k3      -> w4                                          tau/4
//   d1 k3      -> w3                                          tau/4
//   d2 up2,k3  -> w2                                          tau/2
//   d3 k3 [d2, e3] -> w1                                      tau/2
//   d4 up2,k3  -> w0                                          tau
//   d5 k3 [d4, e1] -> w0                                      tau
//   out 1x1    -> n_mels, then * std + mean
// Every conv except the output is followed by a PReLU.

#include <array>
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
#include "phonefix/nn/layers.hpp"
#include "phonefix/problem_model.hpp"

namespace phonefix {

struct GeneratorConfig {
  int tau = 32;
  int n_mels = 80;
  int n_phonemes = 0;
  int embed_dim = 16;
  std::array<int, 5> widths{128, 256, 256, 512, 512};
  // Global log-mel statistics used to standardize the input.
  float norm_mean = 0.0f;
  float norm_std = 1.0f;

  void Validate() const {
    Require(tau >= 4 && tau % 4 == 0, ErrorCode::kInvalidConfig,
            "tau=" + std::to_string(tau) + " must be a positive multiple of 4");
    Require(n_mels >= 1, ErrorCode::kInvalidConfig, "n_mels must be positive");
    Require(n_phonemes >= 1, ErrorCode::kInvalidConfig, "inventory is empty");
    Require(embed_dim >= 1, ErrorCode::kInvalidConfig, "embed_dim must be positive");
    for (int w : widths) Require(w >= 1, ErrorCode::kInvalidConfig, "widths must be positive");
    Require(std::isfinite(norm_mean) && std::isfinite(norm_std) && norm_std > 0,
            ErrorCode::kInvalidConfig, "bad normalization statistics");
  }

  bool operator==(const GeneratorConfig&) const = default;
};

inline nlohmann::json GeneratorConfigToJson(const GeneratorConfig& c) {
  return {{"tau", c.tau},           {"n_mels", c.n_mels},       {"n_phonemes", c.n_phonemes},
          {"embed_dim", c.embed_dim}, {"widths", c.widths},     {"norm_mean", c.norm_mean},
          {"norm_std", c.norm_std}};
}

inline GeneratorConfig GeneratorConfigFromJson(const nlohmann::json& j) {
  GeneratorConfig c;
  try {
    c.tau = j.value("tau", c.tau);
    c.n_mels = j.value("n_mels", c.n_mels);
    c.n_phonemes = j.value("n_phonemes", c.n_phonemes);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    if (j.contains("widths")) c.widths = j.at("widths").get<std::array<int, 5>>();
    c.norm_mean = j.value("norm_mean", c.norm_mean);
    c.norm_std = j.value("norm_std", c.norm_std);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kInvalidConfig, std::string("generator config: ") + e.what());
  }
  return c;
}

// Mean and standard deviation over every log-mel value of the items.
struct NormStats {
  float mean = 0.0f;
  float std = 1.0f;
};

inline NormStats ComputeNormStats(const std::vector<CorpusItem>& items) {
  double sum = 0.0;
  double sq = 0.0;
  double n = 0.0;
  for (const auto& item : items) {
    const auto& f = item.mel.frames;
    sum += f.cast<double>().sum();
    sq += f.cast<double>().squaredNorm();
    n += static_cast<double>(f.size());
  }
  Require(n > 0, ErrorCode::kTooFewItems, "no frames for normalization");
  const double mean = sum / n;
  const double var = std::max(sq / n - mean * mean, 1e-12);
  return {static_cast<float>(mean), static_cast<float>(std::sqrt(var))};
}

template <typename T>
struct GeneratorParams {
  GeneratorConfig cfg;
  nn::Embedding<T> embed;
  std::array<nn::Conv1d<T>, 5> enc;
  std::array<nn::PRelu<T>, 5> enc_act;
  std::array<nn::Conv1d<T>, 5> dec;
  std::array<nn::PRelu<T>, 5> dec_act;
  nn::Conv1d<T> out;

  nn::TensorList<T> tensors() {
    nn::TensorList<T> t;
    embed.AppendTensors("embed", t);
    for (int i = 0; i < 5; ++i) {
      enc[i].AppendTensors("enc" + std::to_string(i + 1), t);
      enc_act[i].AppendTensors("enc" + std::to_string(i + 1) + ".prelu", t);
    }
    for (int i = 0; i < 5; ++i) {
      dec[i].AppendTensors("dec" + std::to_string(i + 1), t);
      dec_act[i].AppendTensors("dec" + std::to_string(i + 1) + ".prelu", t);
    }
    out.AppendTensors("out", t);
    return t;
  }
};

template <typename T = float>
GeneratorParams<T> InitGenerator(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.Validate();
  std::mt19937_64 rng(seed);
  GeneratorParams<T> p;
  p.cfg = cfg;
  const auto& w = cfg.widths;
  p.embed.Init(cfg.n_phonemes, cfg.embed_dim, rng);
  const std::array<int, 5> enc_in{cfg.n_mels + cfg.embed_dim, w[0], w[1], w[2], w[3]};
  const std::array<int, 5> enc_stride{1, 2, 1, 2, 1};
  for (int i = 0; i < 5; ++i) {
    p.enc[i].Init(enc_in[i], w[i], 3, enc_stride[i], rng);
    p.enc_act[i].Init(w[i]);
  }
  const std::array<int, 5> dec_in{w[4], w[3], w[2] + w[2], w[1], w[0] + w[0]};
  const std::array<int, 5> dec_out{w[3], w[2], w[1], w[0], w[0]};
  for (int i = 0; i < 5; ++i) {
    p.dec[i].Init(dec_in[i], dec_out[i], 3, 1, rng);
    p.dec_act[i].Init(dec_out[i]);
  }
  p.out.Init(w[0], cfg.n_mels, 1, 1, rng);
  return p;
}

template <typename T>
struct GeneratorCache {
  int batch = 0;
  std::vector<int> ids;
  std::array<typename nn::Conv1d<T>::Cache, 5> enc;
  std::array<Mat<T>, 5> enc_pre;
  std::array<Mat<T>, 5> enc_post;
  std::array<typename nn::Conv1d<T>::Cache, 5> dec;
  std::array<Mat<T>, 5> dec_pre;
  std::array<Mat<T>, 5> dec_post;
  typename nn::Conv1d<T>::Cache out;
};

// masked: (batch * tau) x n_mels, already zeroed in the masked rows.
// ids: one phoneme index per row. Returns (batch * tau) x n_mels in log-mel units.
template <typename T>
Mat<T> GeneratorForward(const GeneratorParams<T>& p, const Mat<T>& masked,
                        const std::vector<int>& ids, int batch,
                        std::type_identity_t<GeneratorCache<T>>* cache) {
  const auto& cfg = p.cfg;
  const int tau = cfg.tau;
  Require(batch >= 1 && masked.rows() == static_cast<Eigen::Index>(batch) * tau &&
              masked.cols() == cfg.n_mels,
          ErrorCode::kShapeMismatch,
          "generator input is " + std::to_string(masked.rows()) + "x" +
              std::to_string(masked.cols()) + ", expected " + std::to_string(batch * tau) +
              "x" + std::to_string(cfg.n_mels));
  Require(ids.size() == static_cast<std::size_t>(masked.rows()), ErrorCode::kShapeMismatch,
          "label count differs from frame count");
  const T mean = static_cast<T>(cfg.norm_mean);
  const T inv_std = static_cast<T>(1.0 / cfg.norm_std);
  Mat<T> x = nn::ConcatCols<T>(((masked.array() - mean) * inv_std).matrix(),
                               p.embed.Forward(ids));
  GeneratorCache<T> local;
  GeneratorCache<T>& c = cache ? *cache : local;
  const bool keep = cache != nullptr;
  c.batch = batch;
  if (keep) c.ids = ids;

  const std::array<int, 5> enc_len{tau, tau, tau / 2, tau / 2, tau / 4};
  std::array<Mat<T>, 5> h;
  const Mat<T>* in = &x;
  for (int i = 0; i < 5; ++i) {
    Mat<T> pre = p.enc[i].Forward(*in, batch, enc_len[i], keep ? &c.enc[i] : nullptr);
    h[i] = p.enc_act[i].Forward(pre);
    if (keep) c.enc_pre[i] = std::move(pre);
    in = &h[i];
  }

  auto dec_layer = [&](int i, const Mat<T>& input, int length) {
    Mat<T> pre = p.dec[i].Forward(input, batch, length, keep ? &c.dec[i] : nullptr);
    Mat<T> post = p.dec_act[i].Forward(pre);
    if (keep) {
      c.dec_pre[i] = std::move(pre);
      c.dec_post[i] = post;
    }
    return post;
  };
  Mat<T> g1 = dec_layer(0, h[4], tau / 4);
  Mat<T> g2 = dec_layer(1, nn::ZeroStuff2(g1, batch, tau / 4), tau / 2);
  Mat<T> g3 = dec_layer(2, nn::ConcatCols(g2, h[2]), tau / 2);
  Mat<T> g4 = dec_layer(3, nn::ZeroStuff2(g3, batch, tau / 2), tau);
  Mat<T> g5 = dec_layer(4, nn::ConcatCols(g4, h[0]), tau);
  Mat<T> o = p.out.Forward(g5, batch, tau, keep ? &c.out : nullptr);
  if (keep) c.enc_post = std::move(h);
  return ((o.array() * static_cast<T>(cfg.norm_std)) + mean).matrix();
}

// d_out: gradient of the loss w.r.t. the forward output. Accumulates into grad.
template <typename T>
void GeneratorBackward(const GeneratorParams<T>& p, const GeneratorCache<T>& c,
                       const Mat<T>& d_out, GeneratorParams<T>& grad) {
  const int tau = p.cfg.tau;
  const int batch = c.batch;
  const auto& w = p.cfg.widths;
  Mat<T> d = d_out * static_cast<T>(p.cfg.norm_std);
  Mat<T> dg5 = p.out.Backward(d, c.out, grad.out);

  auto dec_back = [&](int i, const Mat<T>& dpost) {
    Mat<T> dpre = p.dec_act[i].Backward(dpost, c.dec_pre[i], grad.dec_act[i]);
    return p.dec[i].Backward(dpre, c.dec[i], grad.dec[i]);
  };
  std::array<Mat<T>, 5> dh;
  for (int i = 0; i < 5; ++i) dh[i] = Mat<T>::Zero(c.enc_post[i].rows(), c.enc_post[i].cols());

  Mat<T> din5 = dec_back(4, dg5);  // [d4 | e1]
  dh[0] += din5.rightCols(w[0]);
  Mat<T> dg4 = din5.leftCols(w[0]);
  Mat<T> dg3 = nn::ZeroStuff2Backward(dec_back(3, dg4), batch, tau / 2);
  Mat<T> din3 = dec_back(2, dg3);  // [d2 | e3]
  dh[2] += din3.rightCols(w[2]);
  Mat<T> dg2 = din3.leftCols(w[2]);
  Mat<T> dg1 = nn::ZeroStuff2Backward(dec_back(1, dg2), batch, tau / 4);
  dh[4] += dec_back(0, dg1);

  Mat<T> dx;
  for (int i = 4; i >= 0; --i) {
    Mat<T> dpre = p.enc_act[i].Backward(dh[i], c.enc_pre[i], grad.enc_act[i]);
    Mat<T> din = p.enc[i].Backward(dpre, c.enc[i], grad.enc[i]);
    if (i > 0) {
      dh[i - 1] += din;
    } else {
      dx = std::move(din);
    }
  }
  p.embed.Backward(dx.rightCols(p.cfg.embed_dim), c.ids, grad.embed);
}

// Single-window inference.
template <typename T>
MatF Generate(const GeneratorParams<T>& p, const MatF& masked_window,
              const FramePhonemeSequence& labels) {
  Require(masked_window.rows() == p.cfg.tau && labels.size() == p.cfg.tau,
          ErrorCode::kShapeMismatch,
          "window must have tau=" + std::to_string(p.cfg.tau) + " frames");
  Mat<T> out = GeneratorForward<T>(p, masked_window.cast<T>(), labels.labels, 1, nullptr);
  return out.template cast<float>();
}

// Trained generator plus everything needed to apply it.
struct GeneratorModel {
  GeneratorParams<float> params;
  PhonemeInventory inventory;
  MelConfig mel;
};

inline void SaveGenerator(const std::filesystem::path& dir, GeneratorModel& model) {
  nlohmann::json config = {{"kind", "generator"},
                           {"generator", GeneratorConfigToJson(model.params.cfg)},
                           {"inventory", InventoryToJson(model.inventory)},
                           {"mel", MelConfigToJson(model.mel)},
                           {"tau", model.params.cfg.tau}};
  nn::SaveCheckpoint(dir, config, model.params.tensors());
}

inline GeneratorModel LoadGenerator(const std::filesystem::path& dir) {
  const auto config = nn::LoadCheckpointConfig(dir);
  Require(config.value("kind", "") == "generator", ErrorCode::kModelMissing,
          dir.string() + " is not a generator checkpoint");
  GeneratorModel model{InitGenerator<float>(GeneratorConfigFromJson(config.at("generator")), 0),
                       InventoryFromJson(config.at("inventory")),
                       MelConfigFromJson(config.at("mel"))};
  nn::LoadCheckpointWeights(dir, model.params.tensors());
  return model;
}

}  // namespace phonefix
