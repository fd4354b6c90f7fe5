// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "phonefix/audio/mel.hpp"

namespace phonefix::testing {

// Vowel-like harmonic signal with a slow pitch glide and two resonances.
inline Waveform SpeechLike(double seconds, int rate = kCanonicalSampleRate) {
  Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::size_t>(seconds * rate);
  w.samples.resize(n);
  std::vector<double> phase(40, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double f0 = 140.0 + 40.0 * std::sin(2.0 * std::numbers::pi * 1.3 * t);
    double s = 0.0;
    for (int h = 1; h <= 40; ++h) {
      const double f = h * f0;
      if (f > 5000) break;
      phase[h - 1] += 2.0 * std::numbers::pi * f / rate;
      const double env = std::exp(-std::pow((f - 700) / 250, 2)) +
                         0.6 * std::exp(-std::pow((f - 1800) / 300, 2)) + 0.02;
      s += env * std::sin(phase[h - 1]);
    }
    w.samples[i] = static_cast<float>(0.1 * s);
  }
  return w;
}

inline double RelativeMelL1(const MelSpectrogram& a, const MelSpectrogram& b) {
  const int t = std::min(a.num_frames(), b.num_frames());
  double num = 0.0, den = 0.0;
  for (int i = 0; i < t; ++i) {
    num += (a.frames.row(i) - b.frames.row(i)).cwiseAbs().sum();
    den += b.frames.row(i).cwiseAbs().sum();
  }
  return num / den;
}

}  // namespace phonefix::testing
