// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Mel exchange files for external vocoders: an 8-byte header (T, D as
// little-endian uint32) followed by T * D little-endian float32, row major.
// A directory of them is described by manifest.json.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "phonefix/audio/mel.hpp"
#include "phonefix/audio/wav.hpp"
#include "phonefix/corpus/corpus.hpp"

namespace phonefix {

static_assert(std::endian::native == std::endian::little, ".mel files are little-endian");

inline std::vector<std::uint8_t> EncodeMelFile(const MatF& frames) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + sizeof(float) * static_cast<std::size_t>(frames.size()));
  wav_detail::PutU32(out, static_cast<std::uint32_t>(frames.rows()));
  wav_detail::PutU32(out, static_cast<std::uint32_t>(frames.cols()));
  const std::size_t start = out.size();
  out.resize(start + sizeof(float) * static_cast<std::size_t>(frames.size()));
  std::memcpy(out.data() + start, frames.data(), sizeof(float) * static_cast<std::size_t>(frames.size()));
  return out;
}

inline MatF DecodeMelFile(std::span<const std::uint8_t> bytes) {
  Require(bytes.size() >= 8, ErrorCode::kCorruptFile, ".mel header truncated");
  const std::uint32_t t = wav_detail::ReadU32(bytes.data());
  const std::uint32_t d = wav_detail::ReadU32(bytes.data() + 4);
  const std::size_t n = static_cast<std::size_t>(t) * d;
  Require(bytes.size() == 8 + n * sizeof(float), ErrorCode::kCorruptFile,
          ".mel payload size does not match its header");
  MatF out(t, d);
  std::memcpy(out.data(), bytes.data() + 8, n * sizeof(float));
  return out;
}

inline void WriteMelFile(const std::filesystem::path& path, const MatF& frames) {
  WriteFileBytes(path, EncodeMelFile(frames));
}

inline MatF ReadMelFile(const std::filesystem::path& path) {
  const auto bytes = ReadFileBytes(path);
  return DecodeMelFile(bytes);
}

struct MelManifestEntry {
  std::string id;
  std::string file;  // relative to the manifest directory
  int frames = 0;
  int bins = 0;
  nlohmann::json extra = nlohmann::json::object();
};

inline void WriteMelManifest(const std::filesystem::path& dir, const MelConfig& mel,
                             const std::vector<MelManifestEntry>& entries) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json j = {{"id", e.id}, {"file", e.file}, {"frames", e.frames}, {"bins", e.bins}};
    for (auto& [k, v] : e.extra.items()) j[k] = v;
    items.push_back(j);
  }
  WriteTextFile(dir / "manifest.json",
                nlohmann::json{{"mel_config", MelConfigToJson(mel)}, {"items", items}}.dump(2) + "\n");
}

}  // namespace phonefix
