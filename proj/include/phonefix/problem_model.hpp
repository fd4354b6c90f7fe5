// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Utterance segmentations, context windows around a phoneme, binary frame
// masks and per-frame phoneme labels. Everything here is a pure function over
// immutable values.

#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "phonefix/error.hpp"
#include "phonefix/types.hpp"

namespace phonefix {

class PhonemeInventory {
 public:
  PhonemeInventory() = default;
  PhonemeInventory(std::vector<std::string> symbols, std::string silence)
      : symbols_(std::move(symbols)), silence_(std::move(silence)) {
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      auto [it, inserted] = index_.emplace(symbols_[i], static_cast<int>(i));
      Require(inserted, ErrorCode::kInvalidConfig,
              "duplicate phoneme symbol '" + symbols_[i] + "'");
    }
    Require(index_.count(silence_) == 1, ErrorCode::kInvalidConfig,
            "silence symbol '" + silence_ + "' is not in the inventory");
  }

  int size() const { return static_cast<int>(symbols_.size()); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  const std::string& silence_symbol() const { return silence_; }
  int silence_index() const { return index_.at(silence_); }

  bool contains(const std::string& symbol) const {
    return index_.count(symbol) != 0;
  }

  int index_of(const std::string& symbol) const {
    auto it = index_.find(symbol);
    if (it == index_.end()) {
      Fail(ErrorCode::kUnknownPhoneme, "symbol '" + symbol + "'");
    }
    return it->second;
  }

  const std::string& symbol(int index) const {
    Require(index >= 0 && index < size(), ErrorCode::kInvalidPhoneme,
            "phoneme index " + std::to_string(index) + " out of range");
    return symbols_[static_cast<std::size_t>(index)];
  }

  bool operator==(const PhonemeInventory& other) const {
    return symbols_ == other.symbols_ && silence_ == other.silence_;
  }

 private:
  std::vector<std::string> symbols_;
  std::string silence_;
  std::unordered_map<std::string, int> index_;
};

// Phoneme k (0-based) covers frames [start_frames[k], start_frames[k+1]),
// the last one ending at total_frames.
struct PhonemeSegmentation {
  std::vector<std::string> phonemes;
  std::vector<int> start_frames;
  int total_frames = 0;

  int size() const { return static_cast<int>(phonemes.size()); }
  int begin(int k) const { return start_frames.at(static_cast<std::size_t>(k)); }
  int end(int k) const {
    return k + 1 < size() ? start_frames[static_cast<std::size_t>(k) + 1]
                          : total_frames;
  }
  int duration(int k) const { return end(k) - begin(k); }

  bool operator==(const PhonemeSegmentation&) const = default;
};

inline void Validate(const PhonemeSegmentation& seg) {
  Require(seg.size() >= 1, ErrorCode::kInvalidArgument,
          "segmentation has no phonemes");
  Require(seg.start_frames.size() == seg.phonemes.size(),
          ErrorCode::kInvalidArgument,
          "phoneme and start-frame counts differ");
  Require(seg.start_frames.front() >= 0, ErrorCode::kInvalidArgument,
          "negative start frame");
  for (int k = 1; k < seg.size(); ++k) {
    Require(seg.begin(k) > seg.begin(k - 1), ErrorCode::kInvalidArgument,
            "start frames must be strictly increasing");
  }
  Require(seg.start_frames.back() < seg.total_frames,
          ErrorCode::kInvalidArgument,
          "last phoneme starts at or after the end of the utterance");
}

inline void Validate(const PhonemeSegmentation& seg,
                     const PhonemeInventory& inventory) {
  Validate(seg);
  for (const auto& p : seg.phonemes) {
    Require(inventory.contains(p), ErrorCode::kUnknownPhoneme,
            "symbol '" + p + "'");
  }
}

inline int MaxDuration(const PhonemeSegmentation& seg) {
  int best = 0;
  for (int k = 0; k < seg.size(); ++k) best = std::max(best, seg.duration(k));
  return best;
}

// A tau-frame window [utterance_start, utterance_start + length) with the
// masked phoneme at window-local frames [mask_lo, mask_hi).
struct WindowSpec {
  int utterance_start = 0;
  int length = 0;
  int mask_lo = 0;
  int mask_hi = 0;

  int masked_frames() const { return mask_hi - mask_lo; }
  bool operator==(const WindowSpec&) const = default;
};

struct MaskVector {
  std::vector<std::uint8_t> values;

  int size() const { return static_cast<int>(values.size()); }
  int sum() const {
    int s = 0;
    for (auto v : values) s += v;
    return s;
  }
  MaskVector complement() const {
    MaskVector out{values};
    for (auto& v : out.values) v = v ? 0 : 1;
    return out;
  }
};

struct FramePhonemeSequence {
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
  bool operator==(const FramePhonemeSequence&) const = default;
};

// Window length is 30% above the longest phoneme of interest: ceil(1.3 * d).
inline int ContextLengthFor(int max_phoneme_frames) {
  Require(max_phoneme_frames >= 1, ErrorCode::kInvalidArgument,
          "max phoneme duration must be positive");
  return (13 * max_phoneme_frames + 9) / 10;
}

inline int RoundUpToMultiple(int value, int multiple) {
  return (value + multiple - 1) / multiple * multiple;
}

// Centers a tau-frame window on phoneme k (odd leftover frame goes right) and
// shifts it back inside [0, T) at the utterance edges.
inline WindowSpec ComputeContextWindow(const PhonemeSegmentation& seg, int k,
                                       int tau) {
  Require(k >= 0 && k < seg.size(), ErrorCode::kSegmentOutOfRange,
          "phoneme index " + std::to_string(k) + " not in [0, " +
              std::to_string(seg.size()) + ")");
  Require(tau >= 1, ErrorCode::kInvalidArgument, "tau must be positive");
  Require(tau <= seg.total_frames, ErrorCode::kWindowTooLong,
          "tau=" + std::to_string(tau) + " exceeds utterance length " +
              std::to_string(seg.total_frames));
  const int lo = seg.begin(k);
  const int hi = seg.end(k);
  Require(hi - lo <= tau, ErrorCode::kSegmentTooLong,
          "phoneme of " + std::to_string(hi - lo) +
              " frames does not fit a window of " + std::to_string(tau));
  const int left = (tau - (hi - lo)) / 2;
  int start = lo - left;
  start = std::clamp(start, 0, seg.total_frames - tau);
  return WindowSpec{start, tau, lo - start, hi - start};
}

inline MaskVector BuildMask(const WindowSpec& window) {
  MaskVector mask;
  mask.values.assign(static_cast<std::size_t>(window.length), 1);
  for (int i = window.mask_lo; i < window.mask_hi; ++i) {
    mask.values[static_cast<std::size_t>(i)] = 0;
  }
  return mask;
}

template <typename T>
Mat<T> ApplyMask(const Mat<T>& window_frames, const MaskVector& mask) {
  Require(window_frames.rows() == mask.size(), ErrorCode::kShapeMismatch,
          "mask length " + std::to_string(mask.size()) + " vs " +
              std::to_string(window_frames.rows()) + " frames");
  Mat<T> out = window_frames;
  for (int i = 0; i < mask.size(); ++i) {
    if (!mask.values[static_cast<std::size_t>(i)]) out.row(i).setZero();
  }
  return out;
}

// Labels each window frame with the phoneme whose segment contains it; frames
// before the first segment get the silence symbol. Frames of override_k get
// override_label instead.
inline FramePhonemeSequence FramePhonemeLabels(
    const PhonemeSegmentation& seg, const WindowSpec& window,
    const PhonemeInventory& inventory, int override_k, int override_label) {
  Require(override_k >= 0 && override_k < seg.size(),
          ErrorCode::kSegmentOutOfRange,
          "override index " + std::to_string(override_k));
  Require(override_label >= 0 && override_label < inventory.size(),
          ErrorCode::kInvalidPhoneme,
          "override label " + std::to_string(override_label));
  Require(window.utterance_start >= 0 &&
              window.utterance_start + window.length <= seg.total_frames,
          ErrorCode::kSegmentOutOfRange, "window lies outside the utterance");
  FramePhonemeSequence out;
  out.labels.resize(static_cast<std::size_t>(window.length));
  int k = -1;
  for (int i = 0; i < window.length; ++i) {
    const int frame = window.utterance_start + i;
    while (k + 1 < seg.size() && seg.begin(k + 1) <= frame) ++k;
    int label;
    if (k < 0) {
      label = inventory.silence_index();
    } else if (k == override_k) {
      label = override_label;
    } else {
      label = inventory.index_of(seg.phonemes[static_cast<std::size_t>(k)]);
    }
    out.labels[static_cast<std::size_t>(i)] = label;
  }
  return out;
}

inline FramePhonemeSequence FramePhonemeLabels(const PhonemeSegmentation& seg,
                                               const WindowSpec& window,
                                               const PhonemeInventory& inventory,
                                               int k) {
  return FramePhonemeLabels(
      seg, window, inventory, k,
      inventory.index_of(seg.phonemes.at(static_cast<std::size_t>(k))));
}

}  // namespace phonefix
