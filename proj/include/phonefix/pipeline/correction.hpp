// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Inference: window around phoneme k, mask it, regenerate it with the desired
// phoneme's labels, splice the window back and vocode the whole utterance.

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "phonefix/audio/mel.hpp"
#include "phonefix/audio/resample.hpp"
#include "phonefix/corpus/corpus.hpp"
#include "phonefix/model/generator.hpp"
#include "phonefix/pipeline/mel_io.hpp"
#include "phonefix/pipeline/vocoder.hpp"
#include "phonefix/problem_model.hpp"

namespace phonefix {

inline constexpr int kDefaultSeamBlend = 3;

// Masked frames come from gen_window. On each side `blend` frames ramp
// linearly toward the generated frames: left seam frame j (0-based, counting
// toward the mask) takes weight j / blend for the generated frame, the right
// seam mirrors it. All other frames are copied bit for bit.
inline MatF SpliceBack(const MatF& full_mel, const MatF& gen_window, const WindowSpec& window,
                       int blend) {
  Require(window.utterance_start >= 0 && window.length >= 1 &&
              window.utterance_start + window.length <= full_mel.rows(),
          ErrorCode::kSegmentOutOfRange, "window lies outside the utterance");
  Require(gen_window.rows() == window.length && gen_window.cols() == full_mel.cols(),
          ErrorCode::kShapeMismatch, "generated window shape");
  Require(window.mask_lo >= 0 && window.mask_lo <= window.mask_hi &&
              window.mask_hi <= window.length,
          ErrorCode::kSegmentOutOfRange, "mask outside the window");
  Require(blend >= 0 && blend <= window.mask_lo && blend <= window.length - window.mask_hi,
          ErrorCode::kBlendTooWide,
          "blend " + std::to_string(blend) + " exceeds the context on one side");
  MatF out = full_mel;
  const int s = window.utterance_start;
  for (int i = window.mask_lo; i < window.mask_hi; ++i) out.row(s + i) = gen_window.row(i);
  for (int j = 0; j < blend; ++j) {
    const float w = static_cast<float>(j) / static_cast<float>(blend);
    const int left = window.mask_lo - blend + j;
    const int right = window.mask_hi + blend - 1 - j;
    out.row(s + left) += w * (gen_window.row(left) - full_mel.row(s + left));
    out.row(s + right) += w * (gen_window.row(right) - full_mel.row(s + right));
  }
  return out;
}

inline MelSpectrogram SpliceBack(const MelSpectrogram& full_mel, const MelSpectrogram& gen_window,
                                 const WindowSpec& window, int blend) {
  return {SpliceBack(full_mel.frames, gen_window.frames, window, blend), full_mel.config};
}

struct CorrectionRequest {
  Waveform waveform;
  PhonemeSegmentation segmentation;
  int k = 0;  // 0-based index of the phoneme to replace
  std::string target;
};

struct CorrectionResult {
  Waveform waveform;
  MelSpectrogram original;
  MelSpectrogram corrected;
  WindowSpec window;
  int blend = 0;
};

// Mel-domain part of the correction; no vocoding.
inline CorrectionResult CorrectMel(const CorrectionRequest& req, const GeneratorModel& model,
                                   int max_blend = kDefaultSeamBlend) {
  const auto& inv = model.inventory;
  Require(inv.contains(req.target), ErrorCode::kInvalidPhoneme,
          "target '" + req.target + "' is not in the inventory");
  Require(req.k >= 0 && req.k < req.segmentation.size(), ErrorCode::kInvalidPhoneme,
          "phoneme index " + std::to_string(req.k) + " not in [0, " +
              std::to_string(req.segmentation.size()) + ")");
  Waveform wave = req.waveform.sample_rate == model.mel.sample_rate
                      ? req.waveform
                      : Resample(req.waveform, model.mel.sample_rate);
  CorrectionResult r;
  r.original = ComputeMelSpectrogram(wave, model.mel);
  PhonemeSegmentation seg = req.segmentation;
  ReconcileSegmentation(seg, r.original.num_frames(), inv, "request");
  const int tau = model.params.cfg.tau;
  Require(seg.total_frames >= tau, ErrorCode::kUtteranceTooShort,
          "utterance has " + std::to_string(seg.total_frames) + " frames; tau is " +
              std::to_string(tau));
  r.window = ComputeContextWindow(seg, req.k, tau);
  const MatF x = r.original.frames.middleRows(r.window.utterance_start, tau);
  const auto mask = BuildMask(r.window);
  const auto labels = FramePhonemeLabels(seg, r.window, inv, req.k, inv.index_of(req.target));
  const MatF y = Generate(model.params, ApplyMask<float>(x, mask), labels);
  r.blend = std::min({max_blend, r.window.mask_lo, tau - r.window.mask_hi});
  r.corrected = {SpliceBack(r.original.frames, y, r.window, r.blend), model.mel};
  return r;
}

inline CorrectionResult CorrectUtterance(const CorrectionRequest& req, const GeneratorModel& model,
                                         const VocoderAdapter& vocoder,
                                         int max_blend = kDefaultSeamBlend) {
  CorrectionResult r = CorrectMel(req, model, max_blend);
  r.waveform = vocoder.Vocode(r.corrected);
  return r;
}

// Identity-pass pairs for vocoder fine-tuning: for every window around a
// target phoneme, the generator output with nothing masked and the true
// labels, plus the window's original audio.
inline nlohmann::json ExportVocoderFinetuneSet(const std::vector<CorpusItem>& items,
                                               const GeneratorModel& model,
                                               const std::vector<std::string>& targets,
                                               const std::filesystem::path& out_dir) {
  const auto& inv = model.inventory;
  const int tau = model.params.cfg.tau;
  const int hop = model.mel.hop_size;
  std::set<std::string> wanted(targets.begin(), targets.end());
  std::filesystem::create_directories(out_dir);
  std::vector<MelManifestEntry> entries;
  for (const auto& item : items) {
    const auto& seg = item.segmentation;
    if (seg.total_frames < tau) continue;
    for (int k = 0; k < seg.size(); ++k) {
      const auto& ph = seg.phonemes[static_cast<std::size_t>(k)];
      if (!wanted.count(ph) || seg.duration(k) > tau) continue;
      const auto window = ComputeContextWindow(seg, k, tau);
      const MatF x = item.mel.frames.middleRows(window.utterance_start, tau);
      const auto labels = FramePhonemeLabels(seg, window, inv, k);
      const MatF y = Generate(model.params, x, labels);  // all-ones mask
      std::string stem = item.id + "_" + std::to_string(k);
      std::replace(stem.begin(), stem.end(), '/', '_');
      WriteMelFile(out_dir / (stem + ".mel"), y);
      const std::size_t a = static_cast<std::size_t>(window.utterance_start) * hop;
      const std::size_t b = std::min(item.waveform.samples.size(),
                                     static_cast<std::size_t>(window.utterance_start + tau) * hop);
      Waveform clip{std::vector<float>(item.waveform.samples.begin() + static_cast<std::ptrdiff_t>(std::min(a, b)),
                                       item.waveform.samples.begin() + static_cast<std::ptrdiff_t>(b)),
                    item.waveform.sample_rate};
      WriteWav(out_dir / (stem + ".wav"), clip);
      const double l1 = (y - x).cwiseAbs().mean();
      entries.push_back({stem, stem + ".mel", tau, static_cast<int>(y.cols()),
                         {{"item_id", item.id},
                          {"segment", k},
                          {"phoneme", ph},
                          {"wav", stem + ".wav"},
                          {"window_start", window.utterance_start},
                          {"l1_to_original", l1}}});
    }
  }
  WriteMelManifest(out_dir, model.mel, entries);
  return nlohmann::json::parse(ReadTextFile(out_dir / "manifest.json"));
}

}  // namespace phonefix
