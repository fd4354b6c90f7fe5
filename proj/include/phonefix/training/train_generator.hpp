// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "phonefix/corpus/corpus.hpp"
#include "phonefix/model/generator.hpp"
#include "phonefix/model/siamese.hpp"
#include "phonefix/nn/adam.hpp"
#include "phonefix/training/config.hpp"
#include "phonefix/training/losses.hpp"
#include "phonefix/training/train_siamese.hpp"

namespace phonefix {

// Longest occurrence of any target phoneme, in frames.
inline int MaxTargetDuration(const std::vector<CorpusItem>& items,
                             const PhonemeInventory& inventory, const std::set<int>& targets) {
  int best = 0;
  for (const auto& item : items) {
    const auto& seg = item.segmentation;
    for (int k = 0; k < seg.size(); ++k) {
      if (targets.count(inventory.index_of(seg.phonemes[static_cast<std::size_t>(k)]))) {
        best = std::max(best, seg.duration(k));
      }
    }
  }
  return best;
}

// tau = ceil(1.3 * longest target phoneme), rounded up to a multiple of 4.
inline int DeriveTau(const std::vector<CorpusItem>& items, const PhonemeInventory& inventory,
                     const std::set<int>& targets) {
  const int d = MaxTargetDuration(items, inventory, targets);
  Require(d >= 1, ErrorCode::kPhonemeAbsent, "no target phoneme occurs");
  return RoundUpToMultiple(ContextLengthFor(d), 4);
}

// One example per occurrence of a target phoneme whose window fits the item.
template <typename T = float>
std::vector<GeneratorExample<T>> BuildGeneratorExamples(const std::vector<CorpusItem>& items,
                                                        const PhonemeInventory& inventory,
                                                        int tau, const std::set<int>& targets) {
  std::vector<GeneratorExample<T>> out;
  for (const auto& item : items) {
    const auto& seg = item.segmentation;
    if (seg.total_frames < tau) continue;
    for (int k = 0; k < seg.size(); ++k) {
      const int label = inventory.index_of(seg.phonemes[static_cast<std::size_t>(k)]);
      if (!targets.count(label) || seg.duration(k) > tau || seg.duration(k) < 1) continue;
      GeneratorExample<T> ex;
      ex.spec = ComputeContextWindow(seg, k, tau);
      ex.window = item.mel.frames.middleRows(ex.spec.utterance_start, tau).template cast<T>();
      ex.mask = BuildMask(ex.spec);
      ex.labels = FramePhonemeLabels(seg, ex.spec, inventory, k).labels;
      ex.phoneme = label;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

// Embeddings of every occurrence of each target phoneme, for reference draws.
inline std::map<int, MatF> BuildReferencePool(const std::vector<CorpusItem>& items,
                                              const PhonemeInventory& inventory,
                                              const std::set<int>& targets,
                                              const SiameseParams<float>& siamese) {
  const SegmentPool pool = CollectSegments(items, inventory);
  std::map<int, MatF> out;
  for (int t : targets) {
    auto it = pool.by_class.find(t);
    if (it == pool.by_class.end()) continue;
    std::vector<MatF> segs;
    for (int idx : it->second) segs.push_back(pool.segments[static_cast<std::size_t>(idx)]);
    MatF emb(static_cast<Eigen::Index>(segs.size()), siamese.cfg.embed_dim);
    constexpr std::size_t kChunk = 64;
    for (std::size_t s = 0; s < segs.size(); s += kChunk) {
      const std::size_t e = std::min(segs.size(), s + kChunk);
      std::vector<MatF> chunk(segs.begin() + static_cast<std::ptrdiff_t>(s),
                              segs.begin() + static_cast<std::ptrdiff_t>(e));
      emb.middleRows(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(e - s)) =
          SiameseForward<float>(siamese, chunk, nullptr);
    }
    out[t] = std::move(emb);
  }
  return out;
}

// Draws q and reference embeddings for one example.
inline void SampleEmbeddingTargets(GeneratorExample<float>& ex, const std::vector<int>& targets,
                                   const std::map<int, MatF>& refs, int n_refs, bool contrast,
                                   std::mt19937_64& rng) {
  auto draw = [&](int phoneme) {
    const MatF& pool = refs.at(phoneme);
    MatF out(n_refs, pool.cols());
    for (int r = 0; r < n_refs; ++r) {
      out.row(r) = pool.row(static_cast<Eigen::Index>(PickIndex(rng, static_cast<std::size_t>(pool.rows()))));
    }
    return out;
  };
  ex.refs_p = draw(ex.phoneme);
  if (contrast) {
    std::vector<int> others;
    for (int t : targets) {
      if (t != ex.phoneme) others.push_back(t);
    }
    ex.q = others[PickIndex(rng, others.size())];
    ex.refs_q = draw(ex.q);
  }
}

struct GeneratorEval {
  LossTerms terms;
  int examples = 0;
};

// Example-weighted mean of the objective over a set of examples (no gradient).
inline GeneratorEval EvaluateGenerator(const GeneratorParams<float>& gen,
                                       const SiameseParams<float>* siamese,
                                       const std::vector<GeneratorExample<float>>& examples,
                                       const LossWeights& w, int batch_size = 32) {
  GeneratorEval out;
  for (std::size_t s = 0; s < examples.size(); s += static_cast<std::size_t>(batch_size)) {
    std::vector<const GeneratorExample<float>*> batch;
    for (std::size_t i = s; i < std::min(examples.size(), s + batch_size); ++i) {
      batch.push_back(&examples[i]);
    }
    const auto t = GeneratorBatchLoss<float>(gen, siamese, batch, w, nullptr);
    const double n = static_cast<double>(batch.size());
    out.terms.masked_l1 += t.masked_l1 * n;
    out.terms.context_l1 += t.context_l1 * n;
    out.terms.recon += t.recon * n;
    out.terms.attract += t.attract * n;
    out.terms.contrast += t.contrast * n;
    out.terms.total += t.total * n;
    out.terms.degenerate += t.degenerate;
    out.examples += static_cast<int>(batch.size());
  }
  if (out.examples > 0) {
    const double inv = 1.0 / out.examples;
    out.terms.masked_l1 *= inv;
    out.terms.context_l1 *= inv;
    out.terms.recon *= inv;
    out.terms.attract *= inv;
    out.terms.contrast *= inv;
    out.terms.total *= inv;
  }
  return out;
}

inline void ShuffleIndices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[PickIndex(rng, i)]);
}

inline LossWeights WeightsOf(const TrainConfig& cfg) {
  return {cfg.lambda1, cfg.lambda2, cfg.lambda_attract, cfg.lambda_contrast};
}

// arch.tau == 0 derives tau from the training split. Normalization statistics
// always come from the training items. The siamese model is read only.
inline std::pair<GeneratorParams<float>, TrainReport> TrainGenerator(
    const std::vector<CorpusItem>& items, const CorpusSplit& split,
    const PhonemeInventory& inventory, const SiameseParams<float>* siamese,
    GeneratorConfig arch, const TrainConfig& cfg, const std::vector<int>& target_list) {
  cfg.Validate();
  const std::set<int> targets(target_list.begin(), target_list.end());
  Require(!targets.empty(), ErrorCode::kInvalidConfig, "no target phonemes");
  const auto train_items = SelectItems(items, split.train);
  for (int t : targets) {
    Require(t >= 0 && t < inventory.size(), ErrorCode::kInvalidPhoneme, "target out of range");
    const auto n = FindOccurrences(train_items, inventory.symbol(t)).size();
    Require(n >= 2, ErrorCode::kPhonemeTooRare,
            "'" + inventory.symbol(t) + "' occurs " + std::to_string(n) +
                " times in the training split; at least 2 are needed");
  }
  const bool embed_terms = cfg.lambda_attract > 0 || cfg.lambda_contrast > 0;
  Require(!embed_terms || siamese != nullptr, ErrorCode::kModelMissing,
          "embedding loss terms need a siamese model");
  Require(cfg.lambda_contrast == 0 || targets.size() >= 2, ErrorCode::kInvalidConfig,
          "contrastive term needs at least two target phonemes");

  arch.n_phonemes = inventory.size();
  if (arch.tau == 0) arch.tau = DeriveTau(train_items, inventory, targets);
  const auto stats = ComputeNormStats(train_items);
  arch.norm_mean = stats.mean;
  arch.norm_std = stats.std;
  GeneratorParams<float> params = InitGenerator<float>(arch, cfg.seed);
  TrainReport report;
  if (cfg.epochs == 0) return {params, report};

  auto train = BuildGeneratorExamples<float>(train_items, inventory, arch.tau, targets);
  Require(!train.empty(), ErrorCode::kUtteranceTooShort, "no training window fits tau");
  auto val = BuildGeneratorExamples<float>(SelectItems(items, split.validation), inventory,
                                           arch.tau, targets);
  const bool val_is_train = val.empty();
  if (val_is_train) val = train;

  std::map<int, MatF> refs;
  if (embed_terms) refs = BuildReferencePool(train_items, inventory, targets, *siamese);
  const LossWeights weights = WeightsOf(cfg);

  std::mt19937_64 rng(cfg.seed + 1);
  nn::Adam<float> adam({cfg.learning_rate});
  JsonLinesLog log(cfg.log_path);
  GeneratorParams<float> best = params;
  std::vector<std::size_t> order(train.size());
  const int steps_per_epoch = static_cast<int>(
      (train.size() + static_cast<std::size_t>(cfg.batch_size) - 1) / cfg.batch_size);
  const int total_steps = cfg.max_steps > 0 ? std::min(cfg.max_steps, cfg.epochs * steps_per_epoch)
                                            : cfg.epochs * steps_per_epoch;
  int steps = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    ShuffleIndices(order, rng);
    double epoch_loss = 0.0;
    int epoch_steps = 0;
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg.batch_size)) {
      if (cfg.max_steps > 0 && steps >= cfg.max_steps) break;
      std::vector<const GeneratorExample<float>*> batch;
      for (std::size_t i = s; i < std::min(order.size(), s + cfg.batch_size); ++i) {
        auto& ex = train[order[i]];
        if (embed_terms) {
          SampleEmbeddingTargets(ex, target_list, refs, cfg.n_refs, cfg.lambda_contrast > 0, rng);
        }
        batch.push_back(&ex);
      }
      auto grad = nn::ZerosLike(params);
      const auto terms = GeneratorBatchLoss<float>(params, siamese, batch, weights, &grad);
      ClipGradients(grad, cfg.clip_norm);
      adam.set_learning_rate(ScheduledLearningRate(cfg, steps, total_steps));
      adam.Step(params.tensors(), grad.tensors());
      report.step_losses.push_back(terms.total);
      epoch_loss += terms.total;
      ++epoch_steps;
      ++steps;
    }
    if (epoch_steps == 0) break;
    // Validation draws restart from the same seed so epochs are comparable.
    std::mt19937_64 val_rng(cfg.seed ^ 0x5eedull);
    if (embed_terms) {
      for (auto& ex : val) {
        SampleEmbeddingTargets(ex, target_list, refs, cfg.n_refs, cfg.lambda_contrast > 0, val_rng);
      }
    }
    const auto v = EvaluateGenerator(params, siamese, val, weights);
    EpochLog entry{epoch, epoch_loss / epoch_steps, v.terms.total,
                   {{"validation_masked_l1", v.terms.masked_l1},
                    {"validation_context_l1", v.terms.context_l1},
                    {"validation_attract", v.terms.attract},
                    {"validation_contrast", v.terms.contrast},
                    {"validation_is_train", val_is_train},
                    {"steps", steps}}};
    report.epochs.push_back(entry);
    log.Write(entry);
    if (v.terms.total < report.best_validation_loss) {
      report.best_validation_loss = v.terms.total;
      report.best_epoch = epoch;
      best = params;
    } else if (epoch - report.best_epoch >= cfg.patience) {
      report.stopped_early = true;
      break;
    }
  }
  return {best, report};
}

}  // namespace phonefix
