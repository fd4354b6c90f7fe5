// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Deterministic synthetic corpus. Every pseudo-phoneme is a harmonic stack
// with its own fundamental and two resonance bands; a synthetic speaker scales
// all fundamentals by a shared pitch factor and the overall level by a gain.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "phonefix/corpus/corpus.hpp"

namespace phonefix {

struct SynthConfig {
  std::uint64_t seed = 1;
  int n_items = 100;
  int n_speakers = 10;
  int min_phonemes = 3;  // per utterance, excluding edge silences
  int max_phonemes = 5;
  int min_frames = 8;  // per phoneme
  int max_frames = 24;
  int min_silence_frames = 6;
  int max_silence_frames = 10;
  // Speaker f0: base_f0, times male_pitch for male speakers, times a
  // per-speaker factor in [1 - pitch_spread, 1 + pitch_spread].
  double base_f0 = 220.0;
  double male_pitch = 0.8;
  double pitch_spread = 0.0;
  double level = 0.05;  // peak harmonic amplitude before gains
  MelConfig mel;
};

// Phonemes differ only in their formant envelope; pitch belongs to the speaker.
struct PseudoPhoneme {
  double formant1;
  double formant2;
};

inline PhonemeInventory DefaultSynthInventory() {
  return PhonemeInventory({"sil", "A", "B", "C", "D"}, "sil");
}

// Acoustic recipe for the i-th non-silence symbol of the inventory.
inline PseudoPhoneme PseudoPhonemeFor(int i) {
  static constexpr std::array<std::array<double, 2>, 6> kFormants = {{
      {700, 1200}, {400, 2100}, {550, 1700}, {300, 2600}, {650, 950}, {350, 1900}}};
  const auto& f = kFormants[static_cast<std::size_t>(i) % kFormants.size()];
  const double shift = 1.0 + 0.07 * static_cast<double>(i / static_cast<int>(kFormants.size()));
  return {f[0] * shift, f[1] * shift};
}

inline double HarmonicEnvelope(const PseudoPhoneme& p, double freq) {
  const double a = (freq - p.formant1) / 180.0;
  const double b = (freq - p.formant2) / 260.0;
  return std::exp(-a * a) + 0.6 * std::exp(-b * b) + 0.02;
}

inline std::vector<CorpusItem> SynthCorpus(const SynthConfig& cfg, const PhonemeInventory& inventory) {
  Require(cfg.n_items >= 1, ErrorCode::kInvalidArgument, "n_items must be >= 1");
  Require(cfg.n_speakers >= 1, ErrorCode::kInvalidArgument, "n_speakers must be >= 1");
  std::vector<std::string> phones;
  for (const auto& s : inventory.symbols()) {
    if (s != inventory.silence_symbol()) phones.push_back(s);
  }
  Require(phones.size() >= 4, ErrorCode::kInvalidConfig,
          "synthetic corpus needs at least 4 pseudo-phonemes");
  std::map<std::string, PseudoPhoneme> recipe;
  for (std::size_t i = 0; i < phones.size(); ++i) recipe[phones[i]] = PseudoPhonemeFor(static_cast<int>(i));

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform_int = [&](int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };

  struct Speaker {
    std::string id;
    double pitch;
    double gain;
    Gender gender;
  };
  std::vector<Speaker> speakers;
  for (int s = 0; s < cfg.n_speakers; ++s) {
    char id[32];
    std::snprintf(id, sizeof id, "spk%02d", s);
    const Gender gender = s % 2 == 0 ? Gender::kFemale : Gender::kMale;
    const double pitch = (gender == Gender::kMale ? cfg.male_pitch : 1.0) *
                         (1.0 - cfg.pitch_spread + 2.0 * cfg.pitch_spread * unit(rng));
    const double gain = 0.7 + 0.3 * unit(rng);
    speakers.push_back({id, pitch, gain, gender});
  }

  const int hop = cfg.mel.hop_size;
  const double sr = cfg.mel.sample_rate;
  constexpr int kRamp = 64;
  std::vector<CorpusItem> items;
  items.reserve(static_cast<std::size_t>(cfg.n_items));
  for (int n = 0; n < cfg.n_items; ++n) {
    const Speaker& spk = speakers[static_cast<std::size_t>(uniform_int(0, cfg.n_speakers - 1))];
    const double item_gain = spk.gain * (0.85 + 0.3 * unit(rng));

    CorpusItem item;
    char utt[32];
    std::snprintf(utt, sizeof utt, "utt%04d", n);
    item.speaker_id = spk.id;
    item.id = spk.id + "/" + utt;
    item.gender = spk.gender;

    auto& seg = item.segmentation;
    std::vector<int> durations;
    auto push = [&](const std::string& p, int frames) {
      seg.phonemes.push_back(p);
      durations.push_back(frames);
    };
    push(inventory.silence_symbol(), uniform_int(cfg.min_silence_frames, cfg.max_silence_frames));
    const int count = uniform_int(cfg.min_phonemes, cfg.max_phonemes);
    std::string word;
    std::string prev;
    for (int k = 0; k < count; ++k) {
      std::string p;
      do {
        p = phones[rng() % phones.size()];
      } while (p == prev);
      prev = p;
      word += p;
      push(p, uniform_int(cfg.min_frames, cfg.max_frames));
    }
    push(inventory.silence_symbol(), uniform_int(cfg.min_silence_frames, cfg.max_silence_frames));
    item.words = {word};

    int frame = 0;
    for (int d : durations) {
      seg.start_frames.push_back(frame);
      frame += d;
    }
    const std::size_t n_samples = static_cast<std::size_t>(frame) * static_cast<std::size_t>(hop);
    seg.total_frames = cfg.mel.frames_for(n_samples);  // the final frame joins the last segment

    // One phase-continuous harmonic source per utterance; per-harmonic
    // amplitudes ramp over kRamp samples at every segment boundary.
    item.waveform.sample_rate = cfg.mel.sample_rate;
    item.waveform.samples.assign(n_samples, 0.0f);
    constexpr int kMaxHarmonics = 64;
    std::vector<double> phase(kMaxHarmonics, 0.0), prev_amp(kMaxHarmonics, 0.0);
    std::vector<double> amp(kMaxHarmonics), freq(kMaxHarmonics);
    std::size_t pos = 0;
    for (int h = 0; h < kMaxHarmonics; ++h) freq[static_cast<std::size_t>(h)] = cfg.base_f0 * spk.pitch * (h + 1);
    for (std::size_t k = 0; k < durations.size(); ++k) {
      const bool silent = seg.phonemes[k] == inventory.silence_symbol();
      const PseudoPhoneme pp = silent ? PseudoPhoneme{} : recipe.at(seg.phonemes[k]);
      for (int h = 0; h < kMaxHarmonics; ++h) {
        const double f = freq[static_cast<std::size_t>(h)];
        const bool on = !silent && f < 5000.0;
        amp[static_cast<std::size_t>(h)] = on ? cfg.level * item_gain * HarmonicEnvelope(pp, f) : 0.0;
      }
      const std::size_t len = static_cast<std::size_t>(durations[k]) * static_cast<std::size_t>(hop);
      for (std::size_t i = 0; i < len; ++i, ++pos) {
        const double ramp = std::min(1.0, static_cast<double>(i) / kRamp);
        double s = 0.0;
        for (int h = 0; h < kMaxHarmonics; ++h) {
          const auto hh = static_cast<std::size_t>(h);
          const double a = prev_amp[hh] + (amp[hh] - prev_amp[hh]) * ramp;
          phase[hh] += 2.0 * std::numbers::pi * freq[hh] / sr;
          if (phase[hh] > 2.0 * std::numbers::pi) phase[hh] -= 2.0 * std::numbers::pi;
          if (a != 0.0) s += a * std::sin(phase[hh]);
        }
        item.waveform.samples[pos] = static_cast<float>(s);
      }
      prev_amp = amp;
    }
    item.mel = ComputeMelSpectrogram(item.waveform, cfg.mel);
    ValidateItem(item, inventory);
    items.push_back(std::move(item));
  }
  std::sort(items.begin(), items.end(),
            [](const CorpusItem& a, const CorpusItem& b) { return a.id < b.id; });
  return items;
}

}  // namespace phonefix
