// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Alignment files: the frame CSV format
//
//   total_frames=<T>
//   phoneme,start_frame
//   sil,0
//   ...
//
// and the "phones" interval tier of a Praat TextGrid (long text format).

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "phonefix/error.hpp"
#include "phonefix/problem_model.hpp"

namespace phonefix {

namespace align_detail {

inline std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string Unquote(const std::string& s) {
  std::string t = Trim(s);
  if (t.size() >= 2 && t.front() == '"' && t.back() == '"') t = t.substr(1, t.size() - 2);
  return t;
}

// Value of a `key = value` line, empty when the line is for another key.
inline bool KeyValue(const std::string& line, const std::string& key, std::string& value) {
  const std::string t = Trim(line);
  if (t.rfind(key, 0) != 0) return false;
  auto rest = Trim(t.substr(key.size()));
  if (rest.empty() || rest.front() != '=') return false;
  value = Trim(rest.substr(1));
  return true;
}

}  // namespace align_detail

inline PhonemeSegmentation ParseAlignmentCsv(const std::string& text) {
  using align_detail::Trim;
  std::istringstream in(text);
  std::string line;
  PhonemeSegmentation seg;
  bool have_total = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = Trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!have_total) {
      const std::string key = "total_frames=";
      Require(line.rfind(key, 0) == 0, ErrorCode::kCorruptFile,
              "alignment must start with total_frames=<T>");
      try {
        seg.total_frames = std::stoi(line.substr(key.size()));
      } catch (const std::exception&) {
        Fail(ErrorCode::kCorruptFile, "bad total_frames line");
      }
      have_total = true;
      continue;
    }
    if (line == "phoneme,start_frame") continue;
    const auto comma = line.find(',');
    Require(comma != std::string::npos, ErrorCode::kCorruptFile,
            "line " + std::to_string(line_no) + ": expected phoneme,start_frame");
    seg.phonemes.push_back(Trim(line.substr(0, comma)));
    try {
      seg.start_frames.push_back(std::stoi(line.substr(comma + 1)));
    } catch (const std::exception&) {
      Fail(ErrorCode::kCorruptFile, "line " + std::to_string(line_no) + ": bad start frame");
    }
  }
  Require(have_total, ErrorCode::kCorruptFile, "empty alignment");
  try {
    Validate(seg);
  } catch (const Error& e) {
    Fail(ErrorCode::kCorruptFile, e.what());
  }
  return seg;
}

inline std::string FormatAlignmentCsv(const PhonemeSegmentation& seg) {
  std::ostringstream out;
  out << "total_frames=" << seg.total_frames << "\n";
  out << "phoneme,start_frame\n";
  for (int k = 0; k < seg.size(); ++k) out << seg.phonemes[k] << "," << seg.start_frames[k] << "\n";
  return out.str();
}

// Reads the interval tier named "phones". Interval boundaries in seconds are
// converted to frames as round(t * sample_rate / hop); empty labels become the
// silence symbol and intervals that collapse to zero frames are dropped.
inline PhonemeSegmentation ParseTextGridPhones(const std::string& text, int sample_rate,
                                               int hop_size, const std::string& silence) {
  using namespace align_detail;
  std::istringstream in(text);
  std::string line, value;
  bool in_phones = false;
  bool found = false;
  double tier_xmax = -1.0;
  double xmin = 0.0, xmax = 0.0;
  struct Interval {
    double xmin;
    std::string label;
  };
  std::vector<Interval> intervals;
  bool in_interval = false;
  while (std::getline(in, line)) {
    const std::string t = Trim(line);
    if (t.rfind("item [", 0) == 0) {
      if (in_phones) break;
      in_interval = false;
      continue;
    }
    if (KeyValue(t, "name", value)) {
      in_phones = Unquote(value) == "phones";
      found = found || in_phones;
      continue;
    }
    if (!in_phones) continue;
    if (t.rfind("intervals [", 0) == 0) {
      in_interval = true;
      continue;
    }
    if (KeyValue(t, "xmin", value)) {
      xmin = std::stod(value);
    } else if (KeyValue(t, "xmax", value)) {
      xmax = std::stod(value);
      if (!in_interval) tier_xmax = xmax;
    } else if (KeyValue(t, "text", value) && in_interval) {
      std::string label = Unquote(value);
      intervals.push_back({xmin, label.empty() ? silence : label});
      tier_xmax = std::max(tier_xmax, xmax);
    }
  }
  Require(found, ErrorCode::kCorruptFile, "TextGrid has no \"phones\" tier");
  Require(!intervals.empty(), ErrorCode::kCorruptFile, "\"phones\" tier is empty");
  PhonemeSegmentation seg;
  seg.total_frames = 1 + static_cast<int>(std::floor(tier_xmax * sample_rate / hop_size + 1e-9));
  for (const auto& iv : intervals) {
    const int start = static_cast<int>(std::lround(iv.xmin * sample_rate / hop_size));
    if (start >= seg.total_frames) break;
    if (!seg.start_frames.empty() && start <= seg.start_frames.back()) {
      // Collapsed interval: the later label wins the shared start frame.
      seg.phonemes.back() = iv.label;
      continue;
    }
    seg.phonemes.push_back(iv.label);
    seg.start_frames.push_back(start);
  }
  try {
    Validate(seg);
  } catch (const Error& e) {
    Fail(ErrorCode::kCorruptFile, e.what());
  }
  return seg;
}

inline std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) Fail(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

}  // namespace phonefix
