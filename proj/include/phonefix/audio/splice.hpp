// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "phonefix/audio/wav.hpp"
#include "phonefix/error.hpp"

namespace phonefix {

// a[0, join_a) ++ linear fade of fade_len samples from a[join_a...] into
// b[join_b...] ++ b[join_b + fade_len, end). Fade weights are 1 - i/L on a and
// i/L on b.
inline Waveform CrossfadeSplice(const Waveform& a, const Waveform& b, std::size_t join_a,
                                std::size_t join_b, std::size_t fade_len) {
  Require(a.sample_rate == b.sample_rate, ErrorCode::kRateMismatch,
          std::to_string(a.sample_rate) + " vs " + std::to_string(b.sample_rate));
  Require(join_a + fade_len <= a.size() && join_b + fade_len <= b.size(),
          ErrorCode::kFadeOutOfRange, "fade window does not fit inside the inputs");
  Waveform out;
  out.sample_rate = a.sample_rate;
  out.samples.reserve(join_a + b.size() - join_b);
  out.samples.insert(out.samples.end(), a.samples.begin(),
                     a.samples.begin() + static_cast<long>(join_a));
  for (std::size_t i = 0; i < fade_len; ++i) {
    const double wb = static_cast<double>(i) / static_cast<double>(fade_len);
    out.samples.push_back(static_cast<float>((1.0 - wb) * a.samples[join_a + i] +
                                             wb * b.samples[join_b + i]));
  }
  out.samples.insert(out.samples.end(), b.samples.begin() + static_cast<long>(join_b + fade_len),
                     b.samples.end());
  return out;
}

}  // namespace phonefix
