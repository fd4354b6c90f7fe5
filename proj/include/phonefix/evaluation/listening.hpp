// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Stimulus export for external listening tests: WAV files plus a JSON
// manifest of ABX word-choice tasks and reference/candidate pairs.

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "phonefix/evaluation/experiment.hpp"

namespace phonefix {

inline constexpr std::array<const char*, 4> kAbxOptionKinds = {"target", "minimal_pair", "control",
                                                               "none"};

// Fisher-Yates with index draws j = rng() mod (i + 1), so the permutation is
// reproducible from the seed alone.
inline std::vector<int> OptionPermutation(std::uint64_t seed, std::size_t task) {
  std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ull * (task + 1));
  std::vector<int> perm(kAbxOptionKinds.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    const std::size_t j = rng() % (i + 1);
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

inline nlohmann::json ExportListeningManifest(const std::vector<Stimulus>& stimuli,
                                              const std::filesystem::path& out_dir,
                                              std::uint64_t seed) {
  std::filesystem::create_directories(out_dir / "stimuli");
  nlohmann::json m;
  m["version"] = 1;
  m["seed"] = seed;
  m["note"] = kOracleDisclaimer;
  m["option_kinds"] = kAbxOptionKinds;
  m["stimuli"] = nlohmann::json::array();
  m["abx_tasks"] = nlohmann::json::array();
  m["mos_pairs"] = nlohmann::json::array();

  for (const auto& s : stimuli) {
    const std::string file = "stimuli/" + s.id + ".wav";
    WriteWav(out_dir / file, s.waveform);
    m["stimuli"].push_back({{"id", s.id},
                            {"file", file},
                            {"condition", s.condition},
                            {"item_id", s.item_id},
                            {"segment", s.segment},
                            {"original_phoneme", s.original_phoneme},
                            {"target_phoneme", s.target_phoneme},
                            {"oracle_prediction", s.predicted}});
  }

  std::mt19937_64 control_rng(seed);
  for (std::size_t t = 0; t < stimuli.size(); ++t) {
    const auto& s = stimuli[t];
    // What a listener should hear: the original word for vocoder_only, the
    // corrected word otherwise.
    const bool untouched = s.condition == kVocoderOnly;
    const std::string target = untouched ? s.original_transcription : s.target_transcription;
    const std::string minimal = untouched ? s.target_transcription : s.original_transcription;
    std::vector<std::string> others;
    for (const auto& o : stimuli) {
      for (const auto* w : {&o.original_transcription, &o.target_transcription}) {
        if (*w != target && *w != minimal &&
            std::find(others.begin(), others.end(), *w) == others.end())
          others.push_back(*w);
      }
    }
    const std::string control =
        others.empty() ? std::string("(control)") : others[control_rng() % others.size()];
    const std::array<std::string, 4> labels = {target, minimal, control, "none of the above"};
    const auto perm = OptionPermutation(seed, t);
    nlohmann::json options = nlohmann::json::array();
    for (int idx : perm)
      options.push_back({{"kind", kAbxOptionKinds[static_cast<std::size_t>(idx)]},
                         {"label", labels[static_cast<std::size_t>(idx)]}});
    m["abx_tasks"].push_back({{"task_id", "abx_" + std::to_string(t)},
                              {"stimulus", s.id},
                              {"options", options},
                              {"option_order", perm}});
  }

  // Candidate renderings against the vocoder_only rendering of the same
  // occurrence.
  for (const auto& ref : stimuli) {
    if (ref.condition != kVocoderOnly) continue;
    for (const auto& cand : stimuli) {
      if (cand.condition == kVocoderOnly || cand.item_id != ref.item_id ||
          cand.segment != ref.segment || cand.target_phoneme != ref.target_phoneme)
        continue;
      m["mos_pairs"].push_back(
          {{"reference", ref.id}, {"candidate", cand.id}, {"condition", cand.condition}});
    }
  }
  WriteTextFile(out_dir / "manifest.json", m.dump(2) + "\n");
  return m;
}

}  // namespace phonefix
