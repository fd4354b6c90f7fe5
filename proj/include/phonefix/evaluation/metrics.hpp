// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "phonefix/corpus/corpus.hpp"
#include "phonefix/model/siamese.hpp"

namespace phonefix {

struct SpectralMetrics {
  double l1 = 0;
  double spectral_convergence = 0;
};

// Element-mean |a - b| and ||a - b||_F / ||b||_F over all frames, or over the
// region's window frames.
inline SpectralMetrics ComputeSpectralMetrics(const MatF& a, const MatF& b,
                                              const std::optional<WindowSpec>& region = std::nullopt) {
  Require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::kShapeMismatch,
          std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
              std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  long lo = 0;
  long n = a.rows();
  if (region) {
    Require(region->utterance_start >= 0 && region->utterance_start + region->length <= a.rows(),
            ErrorCode::kSegmentOutOfRange, "region outside the spectrogram");
    lo = region->utterance_start;
    n = region->length;
  }
  const Eigen::MatrixXd da = a.middleRows(lo, n).cast<double>();
  const Eigen::MatrixXd db = b.middleRows(lo, n).cast<double>();
  SpectralMetrics m;
  if (da.size() == 0) return m;
  m.l1 = (da - db).cwiseAbs().mean();
  const double den = db.norm();
  m.spectral_convergence = den > 0 ? (da - db).norm() / den : 0.0;
  return m;
}

inline SpectralMetrics ComputeSpectralMetrics(const MelSpectrogram& a, const MelSpectrogram& b,
                                              const std::optional<WindowSpec>& region = std::nullopt) {
  return ComputeSpectralMetrics(a.frames, b.frames, region);
}

// Mean embedding per phoneme, keyed by inventory index.
using Centroids = std::map<int, RowVec<float>>;

inline Centroids ComputeCentroids(const SiameseParams<float>& siamese,
                                  const std::vector<CorpusItem>& items,
                                  const PhonemeInventory& inventory, bool include_silence = false) {
  std::map<int, RowVec<double>> sums;
  std::map<int, int> counts;
  for (const auto& item : items) {
    const auto& seg = item.segmentation;
    for (int k = 0; k < seg.size(); ++k) {
      const int c = inventory.index_of(seg.phonemes[static_cast<std::size_t>(k)]);
      if (!include_silence && c == inventory.silence_index()) continue;
      const MatF frames = item.mel.frames.middleRows(seg.begin(k), seg.duration(k));
      const RowVec<double> e = EmbedAcoustic(siamese, frames).cast<double>();
      auto [it, fresh] = sums.try_emplace(c, RowVec<double>::Zero(e.size()));
      it->second += e;
      ++counts[c];
    }
  }
  Centroids out;
  for (const auto& [c, s] : sums) out[c] = (s / counts[c]).cast<float>();
  return out;
}

struct IdentityScore {
  int phoneme = -1;
  std::string symbol;
  double similarity = 0;
};

// Nearest centroid by cosine similarity. Centroids are visited in inventory
// order and only a strictly larger similarity replaces the current best.
inline IdentityScore PhonemeIdentityScore(const MatF& segment, const SiameseParams<float>& siamese,
                                          const Centroids& centroids,
                                          const PhonemeInventory& inventory) {
  Require(!centroids.empty(), ErrorCode::kInvalidArgument, "no centroids");
  Require(segment.rows() > 0, ErrorCode::kEmptySegment, "segment has no frames");
  const RowVec<float> e = EmbedAcoustic(siamese, segment);
  IdentityScore best;
  for (const auto& [c, centroid] : centroids) {
    const double s = CosineSimilarity(e, centroid).value;
    if (best.phoneme < 0 || s > best.similarity) {
      best.phoneme = c;
      best.similarity = s;
    }
  }
  best.symbol = inventory.symbol(best.phoneme);
  return best;
}

}  // namespace phonefix
