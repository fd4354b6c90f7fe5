// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "phonefix/audio/mel.hpp"

namespace phonefix {

inline constexpr int kDefaultGriffinLimIters = 60;

// Linear STFT magnitudes recovered from a log mel spectrogram through the
// filterbank pseudo-inverse. Floor-level values map to zero energy.
inline MatF MelToLinearMagnitude(const MelSpectrogram& mel) {
  const auto basis = GetMelBasis(mel.config);
  Require(mel.num_bins() == mel.config.n_mels, ErrorCode::kShapeMismatch,
          "mel has " + std::to_string(mel.num_bins()) + " bins");
  const float floor = mel.config.floor_value() + 1e-4f;
  MatF energy = mel.frames.unaryExpr([floor](float v) { return v <= floor ? 0.0f : std::exp(v); });
  MatF power = energy * basis->pseudo_inverse.transpose();
  return power.unaryExpr([](float p) { return std::sqrt(std::max(p, 0.0f)); });
}

struct GriffinLimTrace {
  Waveform waveform;
  // ||STFT(x_n)| - target magnitude||_F before each phase update.
  std::vector<double> residuals;
};

namespace gl_detail {

// Works on the padded signal of length (T-1)*hop + fft, where every sample is
// covered by whole frames and overlap-add with squared-window normalization is
// the least-squares inverse of the frame analysis.
class FrameOperator {
 public:
  FrameOperator(const MelConfig& cfg, int frames)
      : cfg_(cfg),
        frames_(frames),
        length_(static_cast<long>(frames - 1) * cfg.hop_size + cfg.fft_size),
        window_(GetMelBasis(cfg)->window),
        fft_(cfg.fft_size),
        norm_(static_cast<std::size_t>(length_), 0.0f),
        buf_(static_cast<std::size_t>(cfg.fft_size)) {
    std::vector<double> wss(static_cast<std::size_t>(length_), 0.0);
    for (int t = 0; t < frames_; ++t) {
      for (int i = 0; i < cfg_.fft_size; ++i) {
        const double w = window_[static_cast<std::size_t>(i)];
        wss[static_cast<std::size_t>(t * cfg_.hop_size + i)] += w * w;
      }
    }
    for (std::size_t i = 0; i < wss.size(); ++i) {
      norm_[i] = wss[i] > 1e-8 ? static_cast<float>(1.0 / wss[i]) : 0.0f;
    }
  }

  long length() const { return length_; }

  void Analyze(const std::vector<float>& x, std::vector<std::complex<float>>& spec) {
    const int bins = cfg_.bins();
    for (int t = 0; t < frames_; ++t) {
      const long origin = static_cast<long>(t) * cfg_.hop_size;
      for (int i = 0; i < cfg_.fft_size; ++i) {
        buf_[static_cast<std::size_t>(i)] =
            x[static_cast<std::size_t>(origin + i)] * window_[static_cast<std::size_t>(i)];
      }
      fft_.Forward(buf_.data(), spec.data() + static_cast<std::size_t>(t) * bins);
    }
  }

  void Synthesize(const std::vector<std::complex<float>>& spec, std::vector<float>& x) {
    const int bins = cfg_.bins();
    std::fill(x.begin(), x.end(), 0.0f);
    const float scale = 1.0f / static_cast<float>(cfg_.fft_size);
    for (int t = 0; t < frames_; ++t) {
      fft_.Inverse(spec.data() + static_cast<std::size_t>(t) * bins, buf_.data());
      const long origin = static_cast<long>(t) * cfg_.hop_size;
      for (int i = 0; i < cfg_.fft_size; ++i) {
        x[static_cast<std::size_t>(origin + i)] +=
            buf_[static_cast<std::size_t>(i)] * scale * window_[static_cast<std::size_t>(i)];
      }
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= norm_[i];
  }

 private:
  MelConfig cfg_;
  int frames_;
  long length_;
  std::vector<float> window_;
  RealFft fft_;
  std::vector<float> norm_;
  std::vector<float> buf_;
};

}  // namespace gl_detail

// Griffin-Lim phase recovery from zero initial phase; deterministic.
// Output has (T-1)*hop samples.
inline GriffinLimTrace GriffinLimWithTrace(const MelSpectrogram& mel, int n_iters) {
  Require(n_iters >= 1, ErrorCode::kInvalidArgument, "n_iters must be >= 1");
  Require(mel.num_frames() >= 1, ErrorCode::kInvalidArgument, "empty mel spectrogram");
  const MelConfig& cfg = mel.config;
  const int frames = mel.num_frames();
  const int bins = cfg.bins();
  const MatF magnitude = MelToLinearMagnitude(mel);

  gl_detail::FrameOperator op(cfg, frames);
  std::vector<std::complex<float>> target(static_cast<std::size_t>(frames) * bins);
  std::vector<std::complex<float>> estimate(target.size());
  for (int t = 0; t < frames; ++t) {
    for (int k = 0; k < bins; ++k) {
      target[static_cast<std::size_t>(t) * bins + k] = magnitude(t, k);
    }
  }
  std::vector<float> x(static_cast<std::size_t>(op.length()));
  GriffinLimTrace trace;
  trace.residuals.reserve(static_cast<std::size_t>(n_iters));
  for (int it = 0; it < n_iters; ++it) {
    op.Synthesize(target, x);
    op.Analyze(x, estimate);
    double residual = 0.0;
    for (int t = 0; t < frames; ++t) {
      for (int k = 0; k < bins; ++k) {
        const std::size_t i = static_cast<std::size_t>(t) * bins + k;
        const float mag = std::abs(estimate[i]);
        const float want = magnitude(t, k);
        residual += static_cast<double>(mag - want) * (mag - want);
        target[i] = mag > 0.0f ? estimate[i] * (want / mag) : std::complex<float>(want, 0.0f);
      }
    }
    trace.residuals.push_back(std::sqrt(residual));
  }
  op.Synthesize(target, x);

  const long pad = cfg.fft_size / 2;
  const long n_out = static_cast<long>(frames - 1) * cfg.hop_size;
  trace.waveform.sample_rate = cfg.sample_rate;
  trace.waveform.samples.assign(x.begin() + pad, x.begin() + pad + n_out);
  for (auto& s : trace.waveform.samples) s = std::clamp(s, -1.0f, 1.0f);
  return trace;
}

inline Waveform GriffinLim(const MelSpectrogram& mel, int n_iters = kDefaultGriffinLimIters) {
  return GriffinLimWithTrace(mel, n_iters).waveform;
}

}  // namespace phonefix
