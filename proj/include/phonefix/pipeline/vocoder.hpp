// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

#include <unistd.h>

#include "phonefix/audio/griffin_lim.hpp"
#include "phonefix/audio/mel.hpp"
#include "phonefix/audio/wav.hpp"
#include "phonefix/pipeline/mel_io.hpp"

namespace phonefix {

enum class VocoderKind { kGriffinLim, kExternalNeural };

// griffin_lim runs in-process. external_neural runs `command` through the
// shell after replacing {mel} with an input .mel file and {out} with the WAV
// path the command must write at 22050 Hz. One external call runs at a time
// per adapter.
class VocoderAdapter {
 public:
  static VocoderAdapter GriffinLimVocoder(int iterations = kDefaultGriffinLimIters) {
    VocoderAdapter v;
    v.kind_ = VocoderKind::kGriffinLim;
    v.iterations_ = iterations;
    return v;
  }

  static VocoderAdapter External(std::string command,
                                 std::filesystem::path work_dir = std::filesystem::temp_directory_path()) {
    VocoderAdapter v;
    v.kind_ = VocoderKind::kExternalNeural;
    v.command_ = std::move(command);
    v.work_dir_ = std::move(work_dir);
    return v;
  }

  VocoderKind kind() const { return kind_; }
  int iterations() const { return iterations_; }
  const std::string& command() const { return command_; }

  Waveform Vocode(const MelSpectrogram& mel) const {
    Require(mel.config == MelConfig{}, ErrorCode::kInvalidConfig,
            "vocoder expects the canonical mel configuration");
    if (kind_ == VocoderKind::kGriffinLim) return GriffinLim(mel, iterations_);
    return RunExternal(mel);
  }

 private:
  VocoderAdapter() = default;

  static std::string ReplaceAll(std::string s, const std::string& from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos;
         pos = s.find(from, pos + to.size())) {
      s.replace(pos, from.size(), to);
    }
    return s;
  }

  static std::string Quote(const std::string& s) { return "'" + ReplaceAll(s, "'", "'\\''") + "'"; }

  Waveform RunExternal(const MelSpectrogram& mel) const {
    std::lock_guard<std::mutex> lock(*mutex_);
    static std::atomic<unsigned> counter{0};
    const auto dir = work_dir_ / ("phonefix_vocoder_" + std::to_string(::getpid()) + "_" +
                                  std::to_string(counter++));
    std::filesystem::create_directories(dir);
    const auto mel_path = dir / "input.mel";
    const auto out_path = dir / "output.wav";
    WriteMelFile(mel_path, mel.frames);
    const std::string cmd =
        ReplaceAll(ReplaceAll(command_, "{mel}", Quote(mel_path.string())), "{out}",
                   Quote(out_path.string()));
    const int status = std::system(cmd.c_str());
    auto cleanup = [&] {
      std::error_code ec;
      std::filesystem::remove_all(dir, ec);
    };
    if (status != 0) {
      cleanup();
      Fail(ErrorCode::kExternalVocoderFailed,
           "command exited with status " + std::to_string(status) + ": " + command_);
    }
    if (!std::filesystem::exists(out_path)) {
      cleanup();
      Fail(ErrorCode::kExternalVocoderFailed, "command wrote no output: " + command_);
    }
    Waveform w;
    try {
      w = LoadWav(out_path);
    } catch (const Error& e) {
      cleanup();
      Fail(ErrorCode::kExternalVocoderFailed, std::string("unreadable output: ") + e.what());
    }
    cleanup();
    Require(w.sample_rate == kCanonicalSampleRate, ErrorCode::kExternalVocoderFailed,
            "output sample rate " + std::to_string(w.sample_rate) + " is not 22050");
    return w;
  }

  VocoderKind kind_ = VocoderKind::kGriffinLim;
  int iterations_ = kDefaultGriffinLimIters;
  std::string command_;
  std::filesystem::path work_dir_;
  std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
};

inline Waveform Vocode(const MelSpectrogram& mel, const VocoderAdapter& adapter) {
  return adapter.Vocode(mel);
}

}  // namespace phonefix
