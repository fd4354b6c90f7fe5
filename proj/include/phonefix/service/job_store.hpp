// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// One directory per job: job.json plus the job's WAV files. job.json is
// replaced atomically (write to a temp file, then rename).

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>

#include <json.hpp>

#include "phonefix/corpus/alignment.hpp"
#include "phonefix/error.hpp"

namespace phonefix {

enum class JobState { kQueued, kRunning, kDone, kFailed };

inline std::string ToString(JobState s) {
  switch (s) {
    case JobState::kQueued: return "queued";
    case JobState::kRunning: return "running";
    case JobState::kDone: return "done";
    case JobState::kFailed: return "failed";
  }
  return "failed";
}

inline JobState ParseJobState(const std::string& s) {
  if (s == "queued") return JobState::kQueued;
  if (s == "running") return JobState::kRunning;
  if (s == "done") return JobState::kDone;
  if (s == "failed") return JobState::kFailed;
  Fail(ErrorCode::kCorruptFile, "job state '" + s + "'");
}

inline constexpr const char* kInputWav = "input.wav";
inline constexpr const char* kVocoderOnlyWav = "vocoder_only.wav";
inline constexpr const char* kGeneratedWav = "generated.wav";

struct CorrectionJob {
  std::string id;
  std::string prompt_id;
  JobState state = JobState::kQueued;
  std::string error;
  bool has_alignment = false;
  std::int64_t created_ms = 0;
  std::int64_t updated_ms = 0;

  nlohmann::json ToJson() const {
    return {{"id", id},
            {"prompt_id", prompt_id},
            {"state", ToString(state)},
            {"error", error},
            {"has_alignment", has_alignment},
            {"created_ms", created_ms},
            {"updated_ms", updated_ms}};
  }

  static CorrectionJob FromJson(const nlohmann::json& j) {
    CorrectionJob job;
    job.id = j.at("id").get<std::string>();
    job.prompt_id = j.at("prompt_id").get<std::string>();
    job.state = ParseJobState(j.at("state").get<std::string>());
    job.error = j.value("error", "");
    job.has_alignment = j.value("has_alignment", false);
    job.created_ms = j.value("created_ms", std::int64_t{0});
    job.updated_ms = j.value("updated_ms", std::int64_t{0});
    return job;
  }
};

inline std::int64_t NowMs() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

class JobStore {
 public:
  explicit JobStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
    std::random_device rd;
    salt_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^ static_cast<std::uint64_t>(NowMs());
  }

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path dir(const std::string& id) const { return root_ / id; }

  CorrectionJob Create(const std::string& prompt_id) {
    std::lock_guard<std::mutex> lock(mu_);
    CorrectionJob job;
    do {
      job.id = NewId();
    } while (std::filesystem::exists(dir(job.id)));
    job.prompt_id = prompt_id;
    job.created_ms = job.updated_ms = NowMs();
    std::filesystem::create_directories(dir(job.id));
    WriteLocked(job);
    return job;
  }

  std::optional<CorrectionJob> Get(const std::string& id) const {
    if (!ValidId(id)) return std::nullopt;
    std::lock_guard<std::mutex> lock(mu_);
    const auto path = dir(id) / "job.json";
    if (!std::filesystem::exists(path)) return std::nullopt;
    return CorrectionJob::FromJson(nlohmann::json::parse(ReadTextFile(path)));
  }

  // Rejects any transition that would move the job backwards.
  void Update(const CorrectionJob& job) {
    std::lock_guard<std::mutex> lock(mu_);
    const auto path = dir(job.id) / "job.json";
    const auto current = CorrectionJob::FromJson(nlohmann::json::parse(ReadTextFile(path)));
    Require(static_cast<int>(job.state) >= static_cast<int>(current.state) &&
                (current.state != JobState::kDone && current.state != JobState::kFailed),
            ErrorCode::kInvalidArgument,
            "job " + job.id + ": " + ToString(current.state) + " -> " + ToString(job.state));
    CorrectionJob next = job;
    next.updated_ms = NowMs();
    WriteLocked(next);
  }

  // Job ids are 16 lowercase hex digits.
  static bool ValidId(const std::string& id) {
    if (id.size() != 16) return false;
    for (char c : id)
      if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    return true;
  }

 private:
  std::string NewId() {
    std::uint64_t x = salt_ + 0x9E3779B97F4A7C15ull * ++counter_;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    x ^= x >> 31;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
  }

  void WriteLocked(const CorrectionJob& job) const {
    const auto final_path = dir(job.id) / "job.json";
    const auto tmp = dir(job.id) / "job.json.tmp";
    WriteTextFile(tmp, job.ToJson().dump(2) + "\n");
    std::filesystem::rename(tmp, final_path);
  }

  std::filesystem::path root_;
  mutable std::mutex mu_;
  std::uint64_t salt_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace phonefix
