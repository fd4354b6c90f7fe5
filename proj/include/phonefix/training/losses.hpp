// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Generator objective:
//   recon    = l1 * mean_{masked}|y - x| + l2 * mean_{context}|y - x|
//   attract  = mean_refs (1 - cos(embed(y[mask]), embed(ref)))
//   contrast = attract of a second pass whose masked labels are set to q,
//              measured against references of q
// Each region mean divides by its own element count.

#include <cmath>
#include <vector>

#include "phonefix/model/generator.hpp"
#include "phonefix/model/siamese.hpp"
#include "phonefix/problem_model.hpp"

namespace phonefix {

namespace loss_detail {

inline double Sign(double v) { return (v > 0) - (v < 0); }

}  // namespace loss_detail

// Adds scale * d(loss)/dy into dy when dy is non-null.
template <typename T>
double ReconstructionLossAcc(const Mat<T>& y, const Mat<T>& x, const MaskVector& mask,
                             double lambda1, double lambda2, double scale, Mat<T>* dy) {
  Require(y.rows() == x.rows() && y.cols() == x.cols(), ErrorCode::kShapeMismatch,
          "reconstruction shapes differ");
  Require(mask.size() == y.rows(), ErrorCode::kShapeMismatch, "mask length differs");
  const int masked = mask.size() - mask.sum();
  const int context = mask.sum();
  const double d = static_cast<double>(y.cols());
  const double w_masked = masked > 0 ? lambda1 / (masked * d) : 0.0;
  const double w_context = context > 0 ? lambda2 / (context * d) : 0.0;
  double loss = 0.0;
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double w = mask.values[static_cast<std::size_t>(r)] ? w_context : w_masked;
    if (w == 0.0) continue;
    double row = 0.0;
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      const double diff = static_cast<double>(y(r, c)) - static_cast<double>(x(r, c));
      row += std::abs(diff);
      if (dy) (*dy)(r, c) += static_cast<T>(scale * w * loss_detail::Sign(diff));
    }
    loss += w * row;
  }
  return loss;
}

template <typename T>
double ReconstructionLoss(const Mat<T>& y, const Mat<T>& x, const MaskVector& mask,
                          double lambda1, double lambda2) {
  return ReconstructionLossAcc<T>(y, x, mask, lambda1, lambda2, 1.0, nullptr);
}

inline double ReconstructionLoss(const MelSpectrogram& y, const MelSpectrogram& x,
                                 const MaskVector& mask, double lambda1, double lambda2) {
  return ReconstructionLoss<float>(y.frames, x.frames, mask, lambda1, lambda2);
}

// Mean masked-region L1 (lambda1 = 1, lambda2 = 0).
template <typename T>
double MaskedL1(const Mat<T>& y, const Mat<T>& x, const MaskVector& mask) {
  return ReconstructionLoss<T>(y, x, mask, 1.0, 0.0);
}

// mean_r (1 - cos(e, refs_r)); writes d(loss)/de into de when non-null.
template <typename T>
double AttractFromEmbedding(const RowVec<T>& e, const Mat<T>& refs, RowVec<T>* de) {
  Require(refs.rows() >= 1, ErrorCode::kEmptySegment, "no reference embeddings");
  Require(refs.cols() == e.size(), ErrorCode::kShapeMismatch, "embedding sizes differ");
  double loss = 0.0;
  if (de) *de = RowVec<T>::Zero(e.size());
  const double inv_n = 1.0 / static_cast<double>(refs.rows());
  for (Eigen::Index r = 0; r < refs.rows(); ++r) {
    const RowVec<T> ref = refs.row(r);
    loss += inv_n * (1.0 - CosineSimilarity(e, ref).value);
    if (de) *de -= static_cast<T>(inv_n) * CosineGradU<T>(e, ref);
  }
  return loss;
}

template <typename T>
Mat<T> EmbedSegments(const SiameseParams<T>& siamese, const std::vector<Mat<T>>& segments) {
  return SiameseForward<T>(siamese, segments, nullptr);
}

template <typename T>
Mat<T> MaskedSlice(const Mat<T>& window, const WindowSpec& spec) {
  Require(spec.mask_hi > spec.mask_lo, ErrorCode::kEmptySegment, "masked region is empty");
  Require(spec.mask_lo >= 0 && spec.mask_hi <= window.rows(), ErrorCode::kShapeMismatch,
          "masked region outside the window");
  return window.middleRows(spec.mask_lo, spec.mask_hi - spec.mask_lo);
}

// refs: raw log-mel segments of the target phoneme.
template <typename T>
double EmbeddingAttractLoss(const Mat<T>& gen_window, const WindowSpec& spec,
                            const SiameseParams<T>& siamese, const std::vector<Mat<T>>& refs) {
  Require(!refs.empty(), ErrorCode::kEmptySegment, "no reference segments");
  const Mat<T> ref_emb = EmbedSegments(siamese, refs);
  const Mat<T> e = EmbedSegments<T>(siamese, {MaskedSlice(gen_window, spec)});
  return AttractFromEmbedding<T>(e.row(0), ref_emb, nullptr);
}

// Labels of the masked frames replaced by q.
inline std::vector<int> OverrideMaskedLabels(const std::vector<int>& labels,
                                             const WindowSpec& spec, int q) {
  std::vector<int> out = labels;
  for (int i = spec.mask_lo; i < spec.mask_hi; ++i) out[static_cast<std::size_t>(i)] = q;
  return out;
}

template <typename T>
double ContrastiveGenerationLoss(const GeneratorParams<T>& gen, const Mat<T>& x_window,
                                 const WindowSpec& spec, const std::vector<int>& true_labels,
                                 int true_phoneme, int q, const SiameseParams<T>& siamese,
                                 const std::vector<Mat<T>>& refs_q) {
  Require(q != true_phoneme, ErrorCode::kSamePhoneme,
          "contrastive phoneme equals the true phoneme");
  const Mat<T> masked = ApplyMask<T>(x_window, BuildMask(spec));
  const Mat<T> y = GeneratorForward<T>(gen, masked, OverrideMaskedLabels(true_labels, spec, q),
                                       1, nullptr);
  return EmbeddingAttractLoss<T>(y, spec, siamese, refs_q);
}

// One training window with the sampled quantities of the current step.
template <typename T>
struct GeneratorExample {
  Mat<T> window;  // tau x n_mels ground truth
  WindowSpec spec;
  MaskVector mask;
  std::vector<int> labels;
  int phoneme = -1;
  // Filled per step when the embedding terms are active.
  int q = -1;
  Mat<T> refs_p;  // n_refs x embed_dim
  Mat<T> refs_q;
};

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double attract = 0.0;
  double contrast = 0.0;
};

struct LossTerms {
  double masked_l1 = 0.0;
  double context_l1 = 0.0;
  double recon = 0.0;
  double attract = 0.0;
  double contrast = 0.0;
  double total = 0.0;
  int degenerate = 0;  // zero embeddings met while computing cosine terms
};

namespace loss_detail {

// Embedding term for a forward output; adds weight/B * gradient into dy.
template <typename T>
double EmbeddingTerm(const SiameseParams<T>& siamese, const Mat<T>& y,
                     const std::vector<const GeneratorExample<T>*>& batch, bool use_q,
                     double weight, Mat<T>* dy, int* degenerate) {
  const int tau = static_cast<int>(y.rows() / static_cast<Eigen::Index>(batch.size()));
  std::vector<Mat<T>> slices;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Mat<T> w = y.middleRows(static_cast<Eigen::Index>(b) * tau, tau);
    slices.push_back(MaskedSlice(w, batch[b]->spec));
  }
  SiameseCache<T> cache;
  const Mat<T> emb = SiameseForward<T>(siamese, slices, dy ? &cache : nullptr);
  Mat<T> de = Mat<T>::Zero(emb.rows(), emb.cols());
  double sum = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Mat<T>& refs = use_q ? batch[b]->refs_q : batch[b]->refs_p;
    const RowVec<T> e = emb.row(static_cast<Eigen::Index>(b));
    if (e.norm() == T(0)) ++*degenerate;
    RowVec<T> g;
    sum += AttractFromEmbedding<T>(e, refs, dy ? &g : nullptr);
    if (dy) de.row(static_cast<Eigen::Index>(b)) = g * static_cast<T>(weight / batch.size());
  }
  if (dy) {
    const auto dslices = SiameseBackward<T>(siamese, cache, de, nullptr);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      dy->middleRows(static_cast<Eigen::Index>(b) * tau + batch[b]->spec.mask_lo,
                     dslices[b].rows()) += dslices[b];
    }
  }
  return sum / static_cast<double>(batch.size());
}

}  // namespace loss_detail

// Batch-mean generator objective. Accumulates parameter gradients into grad
// when it is non-null. siamese may be null when both embedding weights are 0.
template <typename T>
LossTerms GeneratorBatchLoss(const GeneratorParams<T>& gen, const SiameseParams<T>* siamese,
                             const std::vector<const GeneratorExample<T>*>& batch,
                             const LossWeights& w, GeneratorParams<T>* grad) {
  Require(!batch.empty(), ErrorCode::kInvalidArgument, "empty batch");
  const bool embed_terms = w.attract > 0 || w.contrast > 0;
  Require(!embed_terms || siamese != nullptr, ErrorCode::kModelMissing,
          "embedding loss terms need a siamese model");
  const int tau = gen.cfg.tau;
  const int n = static_cast<int>(batch.size());
  Mat<T> masked(static_cast<Eigen::Index>(n) * tau, gen.cfg.n_mels);
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(n) * tau);
  for (int b = 0; b < n; ++b) {
    const auto& ex = *batch[b];
    Require(ex.window.rows() == tau && static_cast<int>(ex.labels.size()) == tau,
            ErrorCode::kShapeMismatch, "example does not match tau");
    masked.middleRows(static_cast<Eigen::Index>(b) * tau, tau) = ApplyMask<T>(ex.window, ex.mask);
    ids.insert(ids.end(), ex.labels.begin(), ex.labels.end());
  }

  LossTerms terms;
  GeneratorCache<T> cache;
  const Mat<T> y = GeneratorForward<T>(gen, masked, ids, n, grad ? &cache : nullptr);
  Mat<T> dy;
  if (grad) dy = Mat<T>::Zero(y.rows(), y.cols());
  for (int b = 0; b < n; ++b) {
    const auto& ex = *batch[b];
    const Mat<T> yb = y.middleRows(static_cast<Eigen::Index>(b) * tau, tau);
    Mat<T> dyb;
    if (grad) dyb = Mat<T>::Zero(tau, y.cols());
    terms.recon += ReconstructionLossAcc<T>(yb, ex.window, ex.mask, w.lambda1, w.lambda2,
                                            1.0 / n, grad ? &dyb : nullptr) / n;
    terms.masked_l1 += ReconstructionLoss<T>(yb, ex.window, ex.mask, 1.0, 0.0) / n;
    terms.context_l1 += ReconstructionLoss<T>(yb, ex.window, ex.mask, 0.0, 1.0) / n;
    if (grad) dy.middleRows(static_cast<Eigen::Index>(b) * tau, tau) += dyb;
  }
  if (w.attract > 0) {
    terms.attract = loss_detail::EmbeddingTerm<T>(*siamese, y, batch, false, w.attract,
                                                  grad ? &dy : nullptr, &terms.degenerate);
  }
  if (grad) GeneratorBackward<T>(gen, cache, dy, *grad);

  if (w.contrast > 0) {
    std::vector<int> q_ids;
    q_ids.reserve(ids.size());
    for (int b = 0; b < n; ++b) {
      const auto& ex = *batch[b];
      Require(ex.q >= 0 && ex.q != ex.phoneme, ErrorCode::kSamePhoneme,
              "contrastive phoneme must differ from the true phoneme");
      const auto over = OverrideMaskedLabels(ex.labels, ex.spec, ex.q);
      q_ids.insert(q_ids.end(), over.begin(), over.end());
    }
    GeneratorCache<T> cache_q;
    const Mat<T> yq = GeneratorForward<T>(gen, masked, q_ids, n, grad ? &cache_q : nullptr);
    Mat<T> dyq;
    if (grad) dyq = Mat<T>::Zero(yq.rows(), yq.cols());
    terms.contrast = loss_detail::EmbeddingTerm<T>(*siamese, yq, batch, true, w.contrast,
                                                   grad ? &dyq : nullptr, &terms.degenerate);
    if (grad) GeneratorBackward<T>(gen, cache_q, dyq, *grad);
  }
  terms.total = terms.recon + w.attract * terms.attract + w.contrast * terms.contrast;
  return terms;
}

}  // namespace phonefix
