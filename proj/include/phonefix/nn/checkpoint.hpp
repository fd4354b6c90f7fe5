// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Checkpoint directory: config.json, weights.bin (little-endian float32 arrays
// back to back) and manifest.json listing name, shape and byte offset.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "phonefix/audio/wav.hpp"
#include "phonefix/corpus/alignment.hpp"
#include "phonefix/nn/layers.hpp"

namespace phonefix::nn {

static_assert(std::endian::native == std::endian::little, "weights.bin is little-endian");

template <typename T>
void SaveCheckpoint(const std::filesystem::path& dir, const nlohmann::json& config,
                    const TensorList<T>& tensors) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = nlohmann::json::array();
  std::vector<char> blob;
  for (auto& [name, m] : tensors) {
    manifest.push_back({{"name", name},
                        {"shape", {m->rows(), m->cols()}},
                        {"offset", blob.size()}});
    const std::size_t start = blob.size();
    blob.resize(start + sizeof(float) * static_cast<std::size_t>(m->size()));
    for (Eigen::Index i = 0; i < m->size(); ++i) {
      const float v = static_cast<float>(m->data()[i]);
      std::memcpy(blob.data() + start + sizeof(float) * i, &v, sizeof(float));
    }
  }
  WriteTextFile(dir / "config.json", config.dump(2) + "\n");
  WriteTextFile(dir / "manifest.json", manifest.dump(2) + "\n");
  std::ofstream out(dir / "weights.bin", std::ios::binary | std::ios::trunc);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot write weights.bin");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  Require(static_cast<bool>(out), ErrorCode::kIo, "short write of weights.bin");
}

inline nlohmann::json LoadCheckpointConfig(const std::filesystem::path& dir) {
  Require(std::filesystem::exists(dir / "config.json"), ErrorCode::kModelMissing,
          "no checkpoint at " + dir.string());
  try {
    return nlohmann::json::parse(ReadTextFile(dir / "config.json"));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kCorruptFile, std::string("config.json: ") + e.what());
  }
}

// Fills already-shaped tensors; names and shapes must match the manifest.
template <typename T>
void LoadCheckpointWeights(const std::filesystem::path& dir, const TensorList<T>& tensors) {
  Require(std::filesystem::exists(dir / "weights.bin") &&
              std::filesystem::exists(dir / "manifest.json"),
          ErrorCode::kModelMissing, "incomplete checkpoint at " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(ReadTextFile(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kCorruptFile, std::string("manifest.json: ") + e.what());
  }
  const auto bytes = ReadFileBytes(dir / "weights.bin");
  Require(manifest.is_array() && manifest.size() == tensors.size(), ErrorCode::kCorruptFile,
          "manifest tensor count differs");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& entry = manifest[i];
    auto& [name, m] = tensors[i];
    Require(entry.value("name", "") == name, ErrorCode::kCorruptFile,
            "manifest order differs at " + name);
    const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
    Require(shape.size() == 2 && shape[0] == m->rows() && shape[1] == m->cols(),
            ErrorCode::kShapeMismatch, "shape differs for " + name);
    const auto offset = entry.at("offset").get<std::size_t>();
    const std::size_t n = static_cast<std::size_t>(m->size());
    Require(offset + n * sizeof(float) <= bytes.size(), ErrorCode::kCorruptFile,
            "weights.bin too short for " + name);
    for (std::size_t j = 0; j < n; ++j) {
      float v;
      std::memcpy(&v, bytes.data() + offset + j * sizeof(float), sizeof(float));
      m->data()[j] = static_cast<T>(v);
    }
  }
}

}  // namespace phonefix::nn
