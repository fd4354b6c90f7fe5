// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Aligned speech corpora on disk:
//
//   <root>/inventory.json             {"symbols": [...], "silence": "sil"}
//   <root>/speakers.csv               speaker_id,gender
//   <root>/<speaker>/<utt>.wav
//   <root>/<speaker>/<utt>.align.csv  (or <utt>.TextGrid)
//   <root>/<speaker>/<utt>.txt        optional word transcript

#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "phonefix/audio/mel.hpp"
#include "phonefix/audio/resample.hpp"
#include "phonefix/audio/wav.hpp"
#include "phonefix/corpus/alignment.hpp"
#include "phonefix/problem_model.hpp"

namespace phonefix {

enum class Gender { kMale, kFemale, kUnknown };

inline std::string ToString(Gender g) {
  switch (g) {
    case Gender::kMale: return "M";
    case Gender::kFemale: return "F";
    default: return "unknown";
  }
}

inline Gender ParseGender(const std::string& s) {
  if (s == "M" || s == "m" || s == "male") return Gender::kMale;
  if (s == "F" || s == "f" || s == "female") return Gender::kFemale;
  return Gender::kUnknown;
}

struct CorpusItem {
  std::string id;
  std::string waveform_path;  // empty for in-memory items
  Waveform waveform;
  MelSpectrogram mel;
  PhonemeSegmentation segmentation;
  std::string speaker_id;
  Gender gender = Gender::kUnknown;
  std::vector<std::string> words;
};

// Reconciles an alignment with a mel frame count (one frame of slack at the
// file end) and checks every symbol against the inventory.
inline void ReconcileSegmentation(PhonemeSegmentation& seg, int mel_frames,
                                  const PhonemeInventory& inventory, const std::string& what) {
  for (const auto& p : seg.phonemes) {
    if (!inventory.contains(p)) {
      Fail(ErrorCode::kUnknownPhoneme, what + ": symbol '" + p + "'");
    }
  }
  if (seg.start_frames.empty() || std::abs(seg.total_frames - mel_frames) > 1 ||
      seg.start_frames.back() >= mel_frames) {
    Fail(ErrorCode::kFrameCountMismatch,
         what + ": alignment covers " + std::to_string(seg.total_frames) +
             " frames, audio has " + std::to_string(mel_frames));
  }
  seg.total_frames = mel_frames;
  Validate(seg, inventory);
}

// Shared by ingested and synthetic items.
inline void ValidateItem(CorpusItem& item, const PhonemeInventory& inventory) {
  Require(!item.speaker_id.empty(), ErrorCode::kInvalidArgument, item.id + ": empty speaker id");
  ReconcileSegmentation(item.segmentation, item.mel.num_frames(), inventory, item.id);
}

inline nlohmann::json InventoryToJson(const PhonemeInventory& inv) {
  return {{"symbols", inv.symbols()}, {"silence", inv.silence_symbol()}};
}

inline PhonemeInventory InventoryFromJson(const nlohmann::json& j) {
  try {
    return PhonemeInventory(j.at("symbols").get<std::vector<std::string>>(),
                            j.at("silence").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kInvalidConfig, std::string("inventory: ") + e.what());
  }
}

inline nlohmann::json MelConfigToJson(const MelConfig& c) {
  return {{"fft_size", c.fft_size},       {"hop_size", c.hop_size},
          {"win_size", c.win_size},       {"n_mels", c.n_mels},
          {"sample_rate", c.sample_rate}, {"fmin", c.fmin},
          {"fmax", c.fmax},               {"log_floor", c.log_floor}};
}

inline MelConfig MelConfigFromJson(const nlohmann::json& j) {
  MelConfig c;
  try {
    c.fft_size = j.value("fft_size", c.fft_size);
    c.hop_size = j.value("hop_size", c.hop_size);
    c.win_size = j.value("win_size", c.win_size);
    c.n_mels = j.value("n_mels", c.n_mels);
    c.sample_rate = j.value("sample_rate", c.sample_rate);
    c.fmin = j.value("fmin", c.fmin);
    c.fmax = j.value("fmax", c.fmax);
    c.log_floor = j.value("log_floor", c.log_floor);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kInvalidConfig, std::string("mel config: ") + e.what());
  }
  c.Validate();
  return c;
}

inline PhonemeInventory LoadInventory(const std::filesystem::path& path) {
  try {
    return InventoryFromJson(nlohmann::json::parse(ReadTextFile(path)));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kInvalidConfig, path.string() + ": " + e.what());
  }
}

inline std::map<std::string, Gender> LoadSpeakers(const std::filesystem::path& path) {
  std::map<std::string, Gender> out;
  if (!std::filesystem::exists(path)) return out;
  std::istringstream in(ReadTextFile(path));
  std::string line;
  while (std::getline(in, line)) {
    line = align_detail::Trim(line);
    if (line.empty() || line == "speaker_id,gender") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    out[align_detail::Trim(line.substr(0, comma))] =
        ParseGender(align_detail::Trim(line.substr(comma + 1)));
  }
  return out;
}

inline std::vector<std::string> SplitWords(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

// Loads every <speaker>/<utt>.wav under root with its alignment, resampled to
// the mel config's rate. Items are returned sorted by id.
inline std::vector<CorpusItem> IngestCorpus(const std::filesystem::path& root,
                                            const PhonemeInventory& inventory,
                                            const MelConfig& cfg) {
  namespace fs = std::filesystem;
  Require(fs::is_directory(root), ErrorCode::kIo, root.string() + " is not a directory");
  const auto speakers = LoadSpeakers(root / "speakers.csv");
  std::vector<fs::path> wavs;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") wavs.push_back(entry.path());
  }
  std::sort(wavs.begin(), wavs.end());
  std::vector<CorpusItem> items;
  items.reserve(wavs.size());
  for (const auto& wav : wavs) {
    CorpusItem item;
    const fs::path rel = fs::relative(wav, root);
    item.speaker_id = rel.has_parent_path() ? rel.parent_path().generic_string() : "unknown";
    item.id = (rel.parent_path() / rel.stem()).generic_string();
    item.waveform_path = wav.string();
    if (auto it = speakers.find(item.speaker_id); it != speakers.end()) item.gender = it->second;

    const fs::path stem = wav.parent_path() / wav.stem();
    const fs::path csv = stem.string() + ".align.csv";
    const fs::path grid = stem.string() + ".TextGrid";
    if (fs::exists(csv)) {
      item.segmentation = ParseAlignmentCsv(ReadTextFile(csv));
    } else if (fs::exists(grid)) {
      item.segmentation = ParseTextGridPhones(ReadTextFile(grid), cfg.sample_rate, cfg.hop_size,
                                              inventory.silence_symbol());
    } else {
      Fail(ErrorCode::kMissingAlignment, item.id + ": no .align.csv or .TextGrid next to " +
                                             wav.filename().string());
    }
    if (const fs::path txt = stem.string() + ".txt"; fs::exists(txt)) {
      item.words = SplitWords(ReadTextFile(txt));
    }
    item.waveform = Resample(LoadWav(wav), cfg.sample_rate);
    item.mel = ComputeMelSpectrogram(item.waveform, cfg);
    ValidateItem(item, inventory);
    items.push_back(std::move(item));
  }
  return items;
}

inline void WriteCorpus(const std::vector<CorpusItem>& items, const PhonemeInventory& inventory,
                        const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  WriteTextFile(root / "inventory.json", InventoryToJson(inventory).dump(2) + "\n");
  std::map<std::string, Gender> speakers;
  for (const auto& item : items) {
    speakers[item.speaker_id] = item.gender;
    const fs::path stem = root / item.id;
    WriteWav(stem.string() + ".wav", item.waveform);
    WriteTextFile(stem.string() + ".align.csv", FormatAlignmentCsv(item.segmentation));
    if (!item.words.empty()) {
      std::string text;
      for (const auto& w : item.words) text += (text.empty() ? "" : " ") + w;
      WriteTextFile(stem.string() + ".txt", text + "\n");
    }
  }
  std::string csv = "speaker_id,gender\n";
  for (const auto& [id, g] : speakers) csv += id + "," + ToString(g) + "\n";
  WriteTextFile(root / "speakers.csv", csv);
}

struct CorpusSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

// Deterministic 80/20 train/validation split of the non-test items. Whole
// speakers go to validation when there are at least two speakers; otherwise
// items are split individually. Items listed in test_ids are held out.
inline CorpusSplit SplitCorpus(const std::vector<CorpusItem>& items, std::uint64_t seed,
                               const std::set<std::string>& test_ids = {}) {
  CorpusSplit split;
  std::vector<const CorpusItem*> pool;
  for (const auto& item : items) {
    if (test_ids.count(item.id)) {
      split.test.push_back(item.id);
    } else {
      pool.push_back(&item);
    }
  }
  Require(pool.size() >= 5, ErrorCode::kTooFewItems,
          std::to_string(pool.size()) + " items; at least 5 are needed");
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  const std::size_t target = static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(pool.size())));

  std::map<std::string, std::vector<const CorpusItem*>> by_speaker;
  for (const auto* item : pool) by_speaker[item->speaker_id].push_back(item);
  std::set<std::string> val_speakers;
  if (by_speaker.size() >= 2) {
    std::vector<std::string> speakers;
    for (const auto& [id, _] : by_speaker) speakers.push_back(id);
    std::shuffle(speakers.begin(), speakers.end(), rng);
    std::size_t count = 0;
    for (const auto& spk : speakers) {
      if (val_speakers.size() + 1 >= by_speaker.size()) break;  // keep one for training
      const std::size_t n = by_speaker[spk].size();
      if (count + n <= target) {
        val_speakers.insert(spk);
        count += n;
      }
      if (count == target) break;
    }
    if (count == 0) val_speakers.clear();
  }
  if (!val_speakers.empty()) {
    for (const auto* item : pool) {
      (val_speakers.count(item->speaker_id) ? split.validation : split.train).push_back(item->id);
    }
  } else {
    for (std::size_t i = 0; i < pool.size(); ++i) {
      (i < target ? split.validation : split.train).push_back(pool[i]->id);
    }
  }
  return split;
}

// Items of `items` whose ids appear in `ids`, in the order of `ids`.
inline std::vector<CorpusItem> SelectItems(const std::vector<CorpusItem>& items,
                                           const std::vector<std::string>& ids) {
  std::map<std::string, const CorpusItem*> by_id;
  for (const auto& item : items) by_id[item.id] = &item;
  std::vector<CorpusItem> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    Require(it != by_id.end(), ErrorCode::kInvalidArgument, "unknown item id " + id);
    out.push_back(*it->second);
  }
  return out;
}

struct PhonemeInstance {
  std::string item_id;
  int item_index = 0;
  int segment = 0;
  bool operator==(const PhonemeInstance&) const = default;
};

inline std::vector<PhonemeInstance> FindOccurrences(const std::vector<CorpusItem>& items,
                                                    const std::string& phoneme) {
  std::vector<PhonemeInstance> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& seg = items[i].segmentation;
    for (int k = 0; k < seg.size(); ++k) {
      if (seg.phonemes[static_cast<std::size_t>(k)] == phoneme) {
        out.push_back({items[i].id, static_cast<int>(i), k});
      }
    }
  }
  return out;
}

// n occurrences drawn uniformly: without replacement when at least n exist,
// with replacement otherwise.
inline std::vector<PhonemeInstance> SamplePhonemeInstances(const std::vector<CorpusItem>& items,
                                                           const std::string& phoneme, int n,
                                                           std::uint64_t seed) {
  auto all = FindOccurrences(items, phoneme);
  Require(!all.empty(), ErrorCode::kPhonemeAbsent, "phoneme '" + phoneme + "' does not occur");
  std::mt19937_64 rng(seed);
  std::vector<PhonemeInstance> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  if (static_cast<int>(all.size()) >= n) {
    for (int i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), all.size() - 1);
      std::swap(all[static_cast<std::size_t>(i)], all[pick(rng)]);
      out.push_back(all[static_cast<std::size_t>(i)]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
    for (int i = 0; i < n; ++i) out.push_back(all[pick(rng)]);
  }
  return out;
}

// Frames [begin, end) of phoneme k of an item's mel.
inline MatF SegmentFrames(const CorpusItem& item, int k) {
  const auto& seg = item.segmentation;
  return item.mel.frames.middleRows(seg.begin(k), seg.duration(k));
}

}  // namespace phonefix
