// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "phonefix/audio/wav.hpp"
#include "phonefix/error.hpp"

namespace phonefix {

namespace resample_detail {

inline constexpr int kZeroCrossings = 16;
inline constexpr double kKaiserBeta = 8.6;

inline double Kaiser(double x) {
  // x in [-1, 1]
  if (std::abs(x) >= 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - x * x)) /
         std::cyl_bessel_i(0.0, kKaiserBeta);
}

// Low-pass interpolation kernel evaluated at `offset` input samples from the
// output instant, cutoff relative to the input Nyquist frequency.
inline double Kernel(double offset, double cutoff) {
  const double half_width = kZeroCrossings / cutoff;
  if (std::abs(offset) >= half_width) return 0.0;
  const double arg = cutoff * offset;
  const double sinc =
      arg == 0.0 ? 1.0
                 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
  return cutoff * sinc * Kaiser(offset / half_width);
}

}  // namespace resample_detail

// Band-limited windowed-sinc resampling. The filter taps for each of the
// (target / gcd) output phases are tabulated once per call.
inline Waveform Resample(const Waveform& w, int target_rate) {
  using namespace resample_detail;
  Require(target_rate > 0, ErrorCode::kInvalidArgument, "target rate must be positive");
  Require(w.sample_rate > 0, ErrorCode::kInvalidArgument, "source rate must be positive");
  if (w.sample_rate == target_rate) return w;

  const long g = std::gcd(static_cast<long>(w.sample_rate), static_cast<long>(target_rate));
  const long up = target_rate / g;     // output phases
  const long down = w.sample_rate / g;  // input step per `up` outputs
  const double cutoff = std::min(1.0, static_cast<double>(target_rate) / w.sample_rate);
  const int reach = static_cast<int>(std::ceil(kZeroCrossings / cutoff));
  const int taps = 2 * reach + 1;

  const auto n_in = static_cast<long>(w.samples.size());
  const long n_out = std::lround(static_cast<double>(n_in) * target_rate / w.sample_rate);

  const bool tabulate = up <= 4096;
  std::vector<double> table;
  if (tabulate) {
    table.resize(static_cast<std::size_t>(up * taps));
    for (long phase = 0; phase < up; ++phase) {
      const double frac = static_cast<double>(phase) / up;
      for (int t = 0; t < taps; ++t) {
        table[static_cast<std::size_t>(phase * taps + t)] = Kernel(frac - (t - reach), cutoff);
      }
    }
  }

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(n_out));
  for (long j = 0; j < n_out; ++j) {
    const long num = j * down;
    const long base = num / up;
    const long phase = num % up;
    const double frac = static_cast<double>(phase) / up;
    double acc = 0.0;
    for (int t = 0; t < taps; ++t) {
      const long i = base + t - reach;
      if (i < 0 || i >= n_in) continue;
      const double k = tabulate ? table[static_cast<std::size_t>(phase * taps + t)]
                                : Kernel(frac - (t - reach), cutoff);
      acc += k * w.samples[static_cast<std::size_t>(i)];
    }
    out.samples[static_cast<std::size_t>(j)] = static_cast<float>(std::clamp(acc, -1.0, 1.0));
  }
  return out;
}

inline void WriteCanonicalWav(const std::filesystem::path& path, const Waveform& w) {
  WriteWav(path, Resample(w, kCanonicalSampleRate));
}

}  // namespace phonefix
