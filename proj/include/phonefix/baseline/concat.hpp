// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Comparison baseline: swap the phoneme's samples for another speaker's
// production of the target, crossfading at both joins.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "phonefix/audio/splice.hpp"
#include "phonefix/corpus/corpus.hpp"

namespace phonefix {

struct DonorQuery {
  std::string target_phoneme;
  Gender gender = Gender::kUnknown;  // kUnknown accepts any speaker
  std::optional<std::string> preferred_word;
};

struct DonorChoice {
  std::size_t item = 0;  // index into the corpus
  int segment = 0;
  std::string item_id;
};

inline DonorChoice SelectDonor(const std::vector<CorpusItem>& corpus, const DonorQuery& query,
                               const std::string& exclude_speaker, std::uint64_t seed) {
  Require(!corpus.empty(), ErrorCode::kNoDonor, "empty corpus");
  std::vector<DonorChoice> candidates;
  std::vector<DonorChoice> preferred;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& item = corpus[i];
    if (item.speaker_id == exclude_speaker) continue;
    if (query.gender != Gender::kUnknown && item.gender != query.gender) continue;
    const bool has_word =
        query.preferred_word &&
        std::find(item.words.begin(), item.words.end(), *query.preferred_word) != item.words.end();
    for (int k = 0; k < item.segmentation.size(); ++k) {
      if (item.segmentation.phonemes[static_cast<std::size_t>(k)] != query.target_phoneme) continue;
      candidates.push_back({i, k, item.id});
      if (has_word) preferred.push_back(candidates.back());
    }
  }
  Require(!candidates.empty(), ErrorCode::kNoDonor,
          "no " + ToString(query.gender) + " speaker other than '" + exclude_speaker +
              "' produces '" + query.target_phoneme + "'");
  const auto& pool = preferred.empty() ? candidates : preferred;
  std::mt19937_64 rng(seed);
  return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
}

// Squared L2 distance between a[ja, ja + len) and b[jb, jb + len).
inline double JoinDistance(const Waveform& a, std::size_t ja, const Waveform& b, std::size_t jb,
                           std::size_t len) {
  double d = 0;
  for (std::size_t i = 0; i < len; ++i) {
    const double e = static_cast<double>(a.samples[ja + i]) - b.samples[jb + i];
    d += e * e;
  }
  return d;
}

// Donor production: samples [start, end) of a longer recording, so the join
// search can slide into the surrounding context.
struct DonorSegment {
  Waveform waveform;
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
};

struct ConcatParams {
  double fade_ms = 10.0;
  double search_radius_ms = 5.0;

  std::size_t fade_len(int rate) const {
    return static_cast<std::size_t>(std::lround(fade_ms * rate / 1000.0));
  }
  long radius(int rate) const { return std::lround(search_radius_ms * rate / 1000.0); }
};

struct ConcatResult {
  Waveform waveform;
  long offset = 0;  // donor shift chosen by the search, in samples
  double join_distance = 0;
  double join_distance_at_zero = 0;
};

// Replaces recipient samples [seg_start, seg_end) with the donor segment. Each
// fade is centered on its boundary. The donor is shifted by one offset in
// [-radius, radius] chosen to minimize the summed distance of the two fade
// windows; shifting both joins together keeps the output length at
// |recipient| - (seg_end - seg_start) + donor.length().
inline ConcatResult SmoothConcatSamples(const Waveform& recipient, std::size_t seg_start,
                                        std::size_t seg_end, const DonorSegment& donor,
                                        std::size_t fade_len, long radius) {
  Require(recipient.sample_rate == donor.waveform.sample_rate, ErrorCode::kRateMismatch,
          std::to_string(recipient.sample_rate) + " vs " +
              std::to_string(donor.waveform.sample_rate));
  Require(seg_start < seg_end && seg_end <= recipient.size() && donor.start < donor.end &&
              donor.end <= donor.waveform.size(),
          ErrorCode::kSegmentOutOfRange, "segment bounds");
  Require(radius >= 0, ErrorCode::kInvalidArgument, "negative search radius");
  const std::size_t h = fade_len / 2;
  Require(fade_len <= donor.length() && seg_start >= h && seg_end - h + fade_len <= recipient.size(),
          ErrorCode::kFadeOutOfRange, "fade of " + std::to_string(fade_len) +
                                          " samples does not fit around the segment");
  auto fits = [&](long o) {
    const long lo = static_cast<long>(donor.start) + o - static_cast<long>(h);
    const long hi = static_cast<long>(donor.end) + o - static_cast<long>(h) + static_cast<long>(fade_len);
    return lo >= 0 && hi <= static_cast<long>(donor.waveform.size());
  };
  auto cost = [&](long o) {
    const auto d0 = static_cast<std::size_t>(static_cast<long>(donor.start) + o) - h;
    const auto d1 = static_cast<std::size_t>(static_cast<long>(donor.end) + o) - h;
    return JoinDistance(recipient, seg_start - h, donor.waveform, d0, fade_len) +
           JoinDistance(donor.waveform, d1, recipient, seg_end - h, fade_len);
  };
  Require(fits(0), ErrorCode::kFadeOutOfRange, "donor has too little context for the fade");

  ConcatResult r;
  r.join_distance_at_zero = cost(0);
  r.join_distance = r.join_distance_at_zero;
  // Visit 0, -1, 1, -2, 2, ... so ties keep the smallest shift.
  for (long step = 1; step <= radius; ++step) {
    for (long o : {-step, step}) {
      if (!fits(o)) continue;
      const double c = cost(o);
      if (c < r.join_distance) {
        r.join_distance = c;
        r.offset = o;
      }
    }
  }
  const std::size_t d0 = static_cast<std::size_t>(static_cast<long>(donor.start) + r.offset) - h;
  const Waveform first = CrossfadeSplice(recipient, donor.waveform, seg_start - h, d0, fade_len);
  r.waveform = CrossfadeSplice(first, recipient, seg_start - h + donor.length(), seg_end - h, fade_len);
  return r;
}

inline std::pair<std::size_t, std::size_t> SegmentSamples(const PhonemeSegmentation& seg, int k,
                                                          int hop, std::size_t n_samples) {
  const auto a = static_cast<std::size_t>(seg.begin(k)) * static_cast<std::size_t>(hop);
  const auto b = static_cast<std::size_t>(seg.end(k)) * static_cast<std::size_t>(hop);
  return {std::min(a, n_samples), std::min(b, n_samples)};
}

inline DonorSegment DonorFromItem(const CorpusItem& item, int k) {
  const auto [a, b] = SegmentSamples(item.segmentation, k, item.mel.config.hop_size,
                                     item.waveform.size());
  return {item.waveform, a, b};
}

inline ConcatResult SmoothConcat(const Waveform& recipient, const PhonemeSegmentation& seg, int k,
                                 const DonorSegment& donor, const ConcatParams& params = {},
                                 int hop = MelConfig{}.hop_size) {
  Require(k >= 0 && k < seg.size(), ErrorCode::kSegmentOutOfRange,
          "phoneme index " + std::to_string(k));
  const auto [a, b] = SegmentSamples(seg, k, hop, recipient.size());
  return SmoothConcatSamples(recipient, a, b, donor, params.fade_len(recipient.sample_rate),
                             params.radius(recipient.sample_rate));
}

}  // namespace phonefix
