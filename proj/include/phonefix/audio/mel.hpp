// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Centered STFT (reflect padding, periodic Hann) and log mel spectrogram with
// area-normalized triangular filters.

#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "phonefix/audio/fft.hpp"
#include "phonefix/audio/wav.hpp"
#include "phonefix/error.hpp"
#include "phonefix/types.hpp"

namespace phonefix {

struct MelConfig {
  int fft_size = 1024;
  int hop_size = 256;
  int win_size = 1024;
  int n_mels = 80;
  int sample_rate = kCanonicalSampleRate;
  double fmin = 0.0;
  double fmax = kCanonicalSampleRate / 2.0;
  double log_floor = 1e-5;

  int bins() const { return fft_size / 2 + 1; }
  float floor_value() const { return static_cast<float>(std::log(log_floor)); }
  int frames_for(std::size_t n_samples) const {
    return 1 + static_cast<int>(n_samples / static_cast<std::size_t>(hop_size));
  }

  void Validate() const {
    Require(fft_size > 0 && hop_size > 0 && win_size > 0 && n_mels > 0,
            ErrorCode::kInvalidConfig, "mel sizes must be positive");
    Require(win_size <= fft_size, ErrorCode::kInvalidConfig, "win_size > fft_size");
    Require(hop_size <= win_size, ErrorCode::kInvalidConfig, "hop_size > win_size");
    Require(n_mels < bins(), ErrorCode::kInvalidConfig, "too many mel bands");
    Require(sample_rate > 0, ErrorCode::kInvalidConfig, "sample_rate must be positive");
    Require(fmin >= 0 && fmax > fmin && fmax <= sample_rate / 2.0,
            ErrorCode::kInvalidConfig, "bad mel frequency range");
    Require(log_floor > 0, ErrorCode::kInvalidConfig, "log_floor must be positive");
  }

  auto key() const {
    return std::make_tuple(fft_size, hop_size, win_size, n_mels, sample_rate, fmin,
                           fmax, log_floor);
  }
  bool operator==(const MelConfig& o) const { return key() == o.key(); }
};

// T x n_mels log mel energies.
struct MelSpectrogram {
  MatF frames;
  MelConfig config;

  int num_frames() const { return static_cast<int>(frames.rows()); }
  int num_bins() const { return static_cast<int>(frames.cols()); }
};

inline double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Periodic Hann of win_size, zero-padded (centered) to fft_size.
inline std::vector<float> AnalysisWindow(const MelConfig& cfg) {
  std::vector<float> w(static_cast<std::size_t>(cfg.fft_size), 0.0f);
  const int offset = (cfg.fft_size - cfg.win_size) / 2;
  for (int i = 0; i < cfg.win_size; ++i) {
    w[static_cast<std::size_t>(offset + i)] = static_cast<float>(
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.win_size));
  }
  return w;
}

// n_mels x bins; each row sums to one.
inline MatF BuildMelFilterbank(const MelConfig& cfg) {
  cfg.Validate();
  const int bins = cfg.bins();
  const double lo = HzToMel(cfg.fmin);
  const double hi = HzToMel(cfg.fmax);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = MelToHz(lo + (hi - lo) * static_cast<double>(i) / (cfg.n_mels + 1));
  }
  MatF fb = MatF::Zero(cfg.n_mels, bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[static_cast<std::size_t>(m)];
    const double center = edges[static_cast<std::size_t>(m) + 1];
    const double right = edges[static_cast<std::size_t>(m) + 2];
    double total = 0.0;
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size;
      double v = 0.0;
      if (f > left && f < right) {
        v = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
      }
      fb(m, k) = static_cast<float>(v);
      total += v;
    }
    if (total <= 0.0) {
      // Band narrower than the FFT bin spacing: take the nearest bin.
      const int k = std::min(bins - 1, static_cast<int>(std::lround(
                                           center * cfg.fft_size / cfg.sample_rate)));
      fb(m, k) = 1.0f;
      total = 1.0;
    }
    fb.row(m) /= static_cast<float>(total);
  }
  return fb;
}

struct MelBasis {
  MatF filterbank;  // n_mels x bins
  MatF pseudo_inverse;  // bins x n_mels
  std::vector<float> window;
};

// Cached per MelConfig; the returned handle is read-only and shareable.
inline std::shared_ptr<const MelBasis> GetMelBasis(const MelConfig& cfg) {
  static std::mutex mu;
  static std::map<decltype(cfg.key()), std::shared_ptr<const MelBasis>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(cfg.key());
  if (it != cache.end()) return it->second;
  auto basis = std::make_shared<MelBasis>();
  basis->filterbank = BuildMelFilterbank(cfg);
  Eigen::MatrixXd fb = basis->filterbank.cast<double>();
  Eigen::MatrixXd pinv = fb.completeOrthogonalDecomposition().pseudoInverse();
  basis->pseudo_inverse = pinv.cast<float>();
  basis->window = AnalysisWindow(cfg);
  cache.emplace(cfg.key(), basis);
  return basis;
}

// Mirror index into [0, n) the way numpy's "reflect" padding does, repeated
// as often as needed for very short inputs.
inline long ReflectIndex(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

// Power spectrogram |X|^2, T x bins, T = 1 + floor(N / hop).
inline MatF StftPower(const Waveform& w, const MelConfig& cfg) {
  Require(!w.samples.empty(), ErrorCode::kInvalidArgument, "empty waveform");
  const auto basis = GetMelBasis(cfg);
  const long n = static_cast<long>(w.samples.size());
  const int frames = cfg.frames_for(w.samples.size());
  const long pad = cfg.fft_size / 2;
  RealFft fft(cfg.fft_size);
  std::vector<float> frame(static_cast<std::size_t>(cfg.fft_size));
  std::vector<std::complex<float>> spec(static_cast<std::size_t>(cfg.bins()));
  MatF power(frames, cfg.bins());
  for (int t = 0; t < frames; ++t) {
    const long origin = static_cast<long>(t) * cfg.hop_size - pad;
    for (int i = 0; i < cfg.fft_size; ++i) {
      const long idx = ReflectIndex(origin + i, n);
      frame[static_cast<std::size_t>(i)] =
          w.samples[static_cast<std::size_t>(idx)] * basis->window[static_cast<std::size_t>(i)];
    }
    fft.Forward(frame.data(), spec.data());
    for (int k = 0; k < cfg.bins(); ++k) power(t, k) = std::norm(spec[static_cast<std::size_t>(k)]);
  }
  return power;
}

// Pre-log mel energies, T x n_mels.
inline MatF MelEnergies(const Waveform& w, const MelConfig& cfg) {
  Require(w.sample_rate == cfg.sample_rate, ErrorCode::kRateMismatch,
          "waveform at " + std::to_string(w.sample_rate) + " Hz, config expects " +
              std::to_string(cfg.sample_rate));
  const auto basis = GetMelBasis(cfg);
  return StftPower(w, cfg) * basis->filterbank.transpose();
}

inline MelSpectrogram ComputeMelSpectrogram(const Waveform& w, const MelConfig& cfg) {
  MelSpectrogram mel;
  mel.config = cfg;
  mel.frames = MelEnergies(w, cfg);
  const float floor = static_cast<float>(cfg.log_floor);
  mel.frames = mel.frames.unaryExpr([floor](float e) { return std::log(std::max(e, floor)); });
  return mel;
}

}  // namespace phonefix
