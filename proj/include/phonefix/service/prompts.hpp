// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "phonefix/corpus/alignment.hpp"
#include "phonefix/problem_model.hpp"

namespace phonefix {

// k is 1-based in the prompt file and in JSON responses, 0-based here.
struct Prompt {
  std::string id;
  std::string word;
  std::vector<std::string> phonemes;
  int k = 0;
  std::string rho_star;
  std::vector<double> durations;  // relative durations, one per phoneme

  nlohmann::json ToJson() const {
    return {{"id", id},
            {"word", word},
            {"phonemes", phonemes},
            {"k", k + 1},
            {"rho_star", rho_star},
            {"durations", durations}};
  }
};

inline Prompt PromptFromJson(const nlohmann::json& j, const PhonemeInventory& inventory) {
  Prompt p;
  try {
    p.id = j.at("id").get<std::string>();
    p.word = j.value("word", "");
    p.phonemes = j.at("phonemes").get<std::vector<std::string>>();
    p.k = j.at("k").get<int>() - 1;
    p.rho_star = j.at("rho_star").get<std::string>();
    if (j.contains("durations")) p.durations = j.at("durations").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kInvalidConfig, std::string("prompt: ") + e.what());
  }
  const std::string what = "prompt '" + p.id + "'";
  Require(!p.id.empty(), ErrorCode::kInvalidConfig, "prompt without id");
  Require(!p.phonemes.empty(), ErrorCode::kInvalidConfig, what + " has no phonemes");
  for (const auto& s : p.phonemes)
    Require(inventory.contains(s), ErrorCode::kInvalidConfig, what + ": unknown phoneme '" + s + "'");
  Require(p.k >= 0 && p.k < static_cast<int>(p.phonemes.size()), ErrorCode::kInvalidConfig,
          what + ": k out of range");
  Require(inventory.contains(p.rho_star), ErrorCode::kInvalidConfig,
          what + ": unknown rho_star '" + p.rho_star + "'");
  if (p.durations.empty()) p.durations.assign(p.phonemes.size(), 1.0);
  Require(p.durations.size() == p.phonemes.size(), ErrorCode::kInvalidConfig,
          what + ": one duration per phoneme required");
  for (double d : p.durations)
    Require(std::isfinite(d) && d > 0, ErrorCode::kInvalidConfig, what + ": durations must be positive");
  return p;
}

inline std::vector<Prompt> LoadPrompts(const std::filesystem::path& path,
                                       const PhonemeInventory& inventory) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ReadTextFile(path));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kInvalidConfig, path.string() + ": " + e.what());
  }
  Require(j.is_array(), ErrorCode::kInvalidConfig, path.string() + ": expected a JSON list");
  std::vector<Prompt> out;
  for (const auto& e : j) {
    out.push_back(PromptFromJson(e, inventory));
    for (std::size_t i = 0; i + 1 < out.size(); ++i)
      Require(out[i].id != out.back().id, ErrorCode::kInvalidConfig,
              "duplicate prompt id '" + out.back().id + "'");
  }
  return out;
}

// Places the prompt's phonemes over T frames in proportion to their relative
// durations. Every phoneme keeps at least one frame.
inline PhonemeSegmentation ProportionalAlignment(const Prompt& p, int total_frames) {
  const int n = static_cast<int>(p.phonemes.size());
  Require(total_frames >= n, ErrorCode::kUtteranceTooShort,
          std::to_string(total_frames) + " frames for " + std::to_string(n) + " phonemes");
  double sum = 0;
  for (double d : p.durations) sum += d;
  PhonemeSegmentation seg;
  seg.phonemes = p.phonemes;
  seg.total_frames = total_frames;
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    int start = static_cast<int>(std::lround(total_frames * acc / sum));
    if (i > 0) start = std::max(start, seg.start_frames.back() + 1);
    start = std::min(start, total_frames - (n - i));
    seg.start_frames.push_back(start);
    acc += p.durations[static_cast<std::size_t>(i)];
  }
  Validate(seg);
  return seg;
}

}  // namespace phonefix
