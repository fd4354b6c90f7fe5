// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Pair training for the acoustic embedder. Each step draws batch_size pairs of
// ground-truth phoneme segments, half same-phoneme and half different:
//   same: 1 - sim        different: max(0, sim - margin)

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <type_traits>
#include <utility>
#include <vector>

#include "phonefix/corpus/corpus.hpp"
#include "phonefix/model/generator.hpp"
#include "phonefix/model/siamese.hpp"
#include "phonefix/nn/adam.hpp"
#include "phonefix/training/config.hpp"

namespace phonefix {

struct SegmentPool {
  std::vector<MatF> segments;
  std::vector<int> labels;
  std::map<int, std::vector<int>> by_class;

  int num_classes() const { return static_cast<int>(by_class.size()); }
};

inline SegmentPool CollectSegments(const std::vector<CorpusItem>& items,
                                   const PhonemeInventory& inventory) {
  SegmentPool pool;
  for (const auto& item : items) {
    for (int k = 0; k < item.segmentation.size(); ++k) {
      if (item.segmentation.duration(k) < 1) continue;
      const int label = inventory.index_of(item.segmentation.phonemes[static_cast<std::size_t>(k)]);
      pool.by_class[label].push_back(static_cast<int>(pool.segments.size()));
      pool.segments.push_back(SegmentFrames(item, k));
      pool.labels.push_back(label);
    }
  }
  return pool;
}

struct SegmentPair {
  int a = 0;
  int b = 0;
  bool same = false;
};

inline std::size_t PickIndex(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline SegmentPair SamplePair(const SegmentPool& pool, bool same, std::mt19937_64& rng) {
  std::vector<int> classes;
  for (const auto& [c, members] : pool.by_class) {
    if (!same || members.size() >= 2) classes.push_back(c);
  }
  if (classes.empty()) {
    for (const auto& [c, members] : pool.by_class) classes.push_back(c);
  }
  const int ca = classes[PickIndex(rng, classes.size())];
  const auto& ma = pool.by_class.at(ca);
  SegmentPair pair;
  pair.same = same;
  const std::size_t ia = PickIndex(rng, ma.size());
  pair.a = ma[ia];
  if (same) {
    if (ma.size() == 1) {
      pair.b = pair.a;
    } else {
      std::size_t ib = PickIndex(rng, ma.size() - 1);
      if (ib >= ia) ++ib;
      pair.b = ma[ib];
    }
  } else {
    std::vector<int> others;
    for (const auto& [c, members] : pool.by_class) {
      if (c != ca) others.push_back(c);
    }
    const auto& mb = pool.by_class.at(others[PickIndex(rng, others.size())]);
    pair.b = mb[PickIndex(rng, mb.size())];
  }
  return pair;
}

struct PairStats {
  double loss = 0.0;
  double mean_same = 0.0;
  double mean_diff = 0.0;
  int degenerate = 0;
};

// Mean pair loss; accumulates parameter gradients into grad when non-null.
template <typename T>
PairStats SiamesePairLoss(const SiameseParams<T>& params, const SegmentPool& pool,
                          const std::vector<SegmentPair>& pairs, double margin,
                          SiameseParams<T>* grad) {
  const int n = static_cast<int>(pairs.size());
  std::vector<Mat<T>> segs;
  segs.reserve(2 * pairs.size());
  for (const auto& p : pairs) {
    segs.push_back(pool.segments[static_cast<std::size_t>(p.a)].template cast<T>());
    segs.push_back(pool.segments[static_cast<std::size_t>(p.b)].template cast<T>());
  }
  SiameseCache<T> cache;
  const Mat<T> emb = SiameseForward<T>(params, segs, grad ? &cache : nullptr);
  Mat<T> de = Mat<T>::Zero(emb.rows(), emb.cols());
  PairStats stats;
  int n_same = 0;
  int n_diff = 0;
  for (int i = 0; i < n; ++i) {
    const RowVec<T> u = emb.row(2 * i);
    const RowVec<T> v = emb.row(2 * i + 1);
    const auto sim = CosineSimilarity(u, v);
    stats.degenerate += sim.degenerate;
    double coeff = 0.0;  // d(pair loss)/d(sim)
    if (pairs[static_cast<std::size_t>(i)].same) {
      stats.loss += 1.0 - sim.value;
      stats.mean_same += sim.value;
      ++n_same;
      coeff = -1.0;
    } else {
      stats.loss += std::max(0.0, sim.value - margin);
      stats.mean_diff += sim.value;
      ++n_diff;
      coeff = sim.value > margin ? 1.0 : 0.0;
    }
    if (grad && coeff != 0.0) {
      const T c = static_cast<T>(coeff / n);
      de.row(2 * i) += c * CosineGradU<T>(u, v);
      de.row(2 * i + 1) += c * CosineGradU<T>(v, u);
    }
  }
  stats.loss /= n;
  if (n_same) stats.mean_same /= n_same;
  if (n_diff) stats.mean_diff /= n_diff;
  if (grad) SiameseBackward<T>(params, cache, de, grad);
  return stats;
}

inline std::vector<SegmentPair> SamplePairs(const SegmentPool& pool, int n, std::mt19937_64& rng) {
  std::vector<SegmentPair> pairs;
  pairs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pairs.push_back(SamplePair(pool, i % 2 == 0, rng));
  return pairs;
}

template <typename P>
void ClipGradients(P& grad, double max_norm) {
  if (max_norm <= 0) return;
  auto tensors = grad.tensors();
  const double norm = nn::GlobalNorm(tensors);
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  for (auto& [name, m] : tensors) *m *= static_cast<typename std::decay_t<decltype(*m)>::Scalar>(s);
}

// Trains on the split's training items; validation pairs come from the
// validation items when they hold two or more phoneme classes.
inline std::pair<SiameseParams<float>, TrainReport> TrainSiamese(
    const std::vector<CorpusItem>& items, const CorpusSplit& split,
    const PhonemeInventory& inventory, SiameseConfig arch, const TrainConfig& cfg) {
  cfg.Validate();
  const auto train_items = SelectItems(items, split.train);
  const SegmentPool train = CollectSegments(train_items, inventory);
  Require(train.num_classes() >= 2, ErrorCode::kTooFewClasses,
          "siamese training needs at least two phoneme classes");
  const auto stats = ComputeNormStats(train_items);
  arch.norm_mean = stats.mean;
  arch.norm_std = stats.std;
  SiameseParams<float> params = InitSiamese<float>(arch, cfg.seed);
  TrainReport report;
  if (cfg.epochs == 0) return {params, report};

  const SegmentPool val_pool = [&] {
    SegmentPool v = CollectSegments(SelectItems(items, split.validation), inventory);
    return v.num_classes() >= 2 ? v : train;
  }();
  std::mt19937_64 val_rng(cfg.seed ^ 0x5eedull);
  const auto val_pairs = SamplePairs(val_pool, cfg.validation_pairs, val_rng);

  std::mt19937_64 rng(cfg.seed + 1);
  nn::Adam<float> adam({cfg.learning_rate});
  JsonLinesLog log(cfg.log_path);
  SiameseParams<float> best = params;
  const int steps_per_epoch = std::max<int>(
      1, (static_cast<int>(train.segments.size()) + cfg.batch_size - 1) / cfg.batch_size);
  const int total_steps = cfg.max_steps > 0 ? std::min(cfg.max_steps, cfg.epochs * steps_per_epoch)
                                            : cfg.epochs * steps_per_epoch;
  int steps = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    int epoch_steps = 0;
    for (int s = 0; s < steps_per_epoch; ++s) {
      if (cfg.max_steps > 0 && steps >= cfg.max_steps) break;
      const auto pairs = SamplePairs(train, cfg.batch_size, rng);
      auto grad = nn::ZerosLike(params);
      const auto st = SiamesePairLoss<float>(params, train, pairs, cfg.margin, &grad);
      ClipGradients(grad, cfg.clip_norm);
      adam.set_learning_rate(ScheduledLearningRate(cfg, steps, total_steps));
      adam.Step(params.tensors(), grad.tensors());
      report.step_losses.push_back(st.loss);
      epoch_loss += st.loss;
      ++epoch_steps;
      ++steps;
    }
    if (epoch_steps == 0) break;
    const auto val = SiamesePairLoss<float>(params, val_pool, val_pairs, cfg.margin, nullptr);
    EpochLog entry{epoch, epoch_loss / epoch_steps, val.loss,
                   {{"mean_same_similarity", val.mean_same},
                    {"mean_diff_similarity", val.mean_diff},
                    {"degenerate", val.degenerate}}};
    report.epochs.push_back(entry);
    log.Write(entry);
    if (val.loss < report.best_validation_loss) {
      report.best_validation_loss = val.loss;
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
