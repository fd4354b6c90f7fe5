// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// HTTP front end for the correction pipeline. Submissions are validated
// synchronously and corrected by a bounded worker pool.

#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "phonefix/audio/resample.hpp"
#include "phonefix/model/generator.hpp"
#include "phonefix/pipeline/correction.hpp"
#include "phonefix/service/job_store.hpp"
#include "phonefix/service/prompts.hpp"

// After Eigen: <resolv.h> defines a _res macro that collides with Eigen internals.
#include <httplib.h>

namespace phonefix {

struct ServiceConfig {
  std::filesystem::path ckpt_dir;  // generator checkpoint, or a directory holding generator/
  std::filesystem::path prompts_path;
  std::filesystem::path jobs_dir = "jobs";
  std::string host = "0.0.0.0";
  int port = 8080;  // 0 picks a free port
  int workers = 2;
  std::uint64_t ab_seed = 1;
  std::size_t max_upload_bytes = 2 * 1024 * 1024;
  double max_seconds = 10.0;
  int griffin_lim_iters = kDefaultGriffinLimIters;
  std::string vocoder_command;  // external vocoder; empty uses Griffin-Lim

  static ServiceConfig FromEnv() {
    ServiceConfig c;
    auto env = [](const char* name) -> std::optional<std::string> {
      const char* v = std::getenv(name);
      if (v == nullptr || *v == '\0') return std::nullopt;
      return std::string(v);
    };
    if (auto v = env("CKPT_DIR")) c.ckpt_dir = *v;
    if (auto v = env("PROMPTS_PATH")) c.prompts_path = *v;
    if (auto v = env("JOBS_DIR")) c.jobs_dir = *v;
    if (auto v = env("PORT")) {
      try {
        c.port = std::stoi(*v);
      } catch (const std::exception&) {
        Fail(ErrorCode::kInvalidConfig, "PORT '" + *v + "'");
      }
    }
    if (auto v = env("VOCODER_CMD")) c.vocoder_command = *v;
    return c;
  }
};

namespace service_detail {

inline std::uint64_t Mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t Fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ull;
  return h;
}

inline std::string Hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline void Reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void ReplyError(httplib::Response& res, int status, const std::string& message) {
  Reply(res, status, {{"error", message}});
}

inline std::optional<std::string> FormValue(const httplib::Request& req, const std::string& key) {
  if (req.has_file(key)) return req.get_file_value(key).content;
  if (req.has_param(key)) return req.get_param_value(key);
  return std::nullopt;
}

}  // namespace service_detail

inline GeneratorModel LoadServiceModel(const std::filesystem::path& ckpt_dir) {
  Require(!ckpt_dir.empty(), ErrorCode::kInvalidConfig, "CKPT_DIR is not set");
  if (std::filesystem::exists(ckpt_dir / "generator" / "config.json"))
    return LoadGenerator(ckpt_dir / "generator");
  return LoadGenerator(ckpt_dir);
}

class CorrectionService {
 public:
  explicit CorrectionService(ServiceConfig cfg)
      : cfg_(std::move(cfg)),
        model_(LoadServiceModel(cfg_.ckpt_dir)),
        prompts_(LoadPromptsChecked()),
        store_(cfg_.jobs_dir),
        vocoder_(cfg_.vocoder_command.empty()
                     ? VocoderAdapter::GriffinLimVocoder(cfg_.griffin_lim_iters)
                     : VocoderAdapter::External(cfg_.vocoder_command)) {
    Require(cfg_.workers >= 0, ErrorCode::kInvalidConfig, "negative worker count");
    secret_ = LoadSecret();
    Routes();
    for (int i = 0; i < cfg_.workers; ++i) workers_.emplace_back([this] { WorkerLoop(); });
  }

  CorrectionService(const CorrectionService&) = delete;
  CorrectionService& operator=(const CorrectionService&) = delete;

  ~CorrectionService() { Stop(); }

  // Binds and serves on a background thread; returns the bound port.
  int Start() {
    int port = cfg_.port;
    if (port == 0) {
      port = server_.bind_to_any_port(cfg_.host);
    } else if (!server_.bind_to_port(cfg_.host, port)) {
      port = -1;
    }
    Require(port > 0, ErrorCode::kIo, "cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
    listener_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port;
  }

  // Serves on the calling thread until Stop().
  void Run() {
    Require(server_.listen(cfg_.host, cfg_.port), ErrorCode::kIo,
            "cannot listen on " + cfg_.host + ":" + std::to_string(cfg_.port));
  }

  void Stop() {
    server_.stop();
    if (listener_.joinable()) listener_.join();
    {
      std::lock_guard<std::mutex> lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_)
      if (t.joinable()) t.join();
    workers_.clear();
  }

  const std::vector<Prompt>& prompts() const { return prompts_; }
  const GeneratorModel& model() const { return model_; }
  JobStore& store() { return store_; }

  // True when A/B position A holds the generated output.
  bool GeneratedFirst(const std::string& job_id, std::uint64_t seed) const {
    return (service_detail::Mix(service_detail::Fnv1a(job_id) ^ service_detail::Mix(seed)) & 1) != 0;
  }

  std::string RevealToken(const std::string& job_id, std::uint64_t seed) const {
    return std::to_string(seed) + "-" +
           service_detail::Hex(service_detail::Mix(service_detail::Fnv1a(job_id) ^ secret_ ^
                                                   service_detail::Mix(seed + 1)));
  }

 private:
  std::vector<Prompt> LoadPromptsChecked() {
    Require(!cfg_.prompts_path.empty(), ErrorCode::kInvalidConfig, "PROMPTS_PATH is not set");
    return LoadPrompts(cfg_.prompts_path, model_.inventory);
  }

  std::uint64_t LoadSecret() {
    const auto path = store_.root() / ".ab_secret";
    if (std::filesystem::exists(path)) return std::stoull(ReadTextFile(path), nullptr, 16);
    std::random_device rd;
    const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    WriteTextFile(path, service_detail::Hex(s));
    return s;
  }

  const Prompt* FindPrompt(const std::string& id) const {
    for (const auto& p : prompts_)
      if (p.id == id) return &p;
    return nullptr;
  }

  std::string AudioUrl(const std::string& id, const char* file) const {
    return "/api/audio/" + id + "/" + file;
  }

  nlohmann::json JobView(const CorrectionJob& job) const {
    nlohmann::json j = job.ToJson();
    if (job.state == JobState::kDone) {
      j["outputs"] = {{"vocoder_only", AudioUrl(job.id, kVocoderOnlyWav)},
                      {"generated", AudioUrl(job.id, kGeneratedWav)}};
    }
    return j;
  }

  std::uint64_t SeedParam(const httplib::Request& req) const {
    if (!req.has_param("seed")) return cfg_.ab_seed;
    return std::stoull(req.get_param_value("seed"));
  }

  void Routes() {
    using service_detail::Reply;
    using service_detail::ReplyError;
    server_.set_payload_max_length(cfg_.max_upload_bytes);
    server_.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                                     std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        ReplyError(res, 500, e.what());
      } catch (...) {
        ReplyError(res, 500, "unknown error");
      }
    });

    server_.Get("/api/prompts", [this](const httplib::Request&, httplib::Response& res) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& p : prompts_) out.push_back(p.ToJson());
      Reply(res, 200, out);
    });

    server_.Post("/api/recordings", [this](const httplib::Request& req, httplib::Response& res) {
      Submit(req, res);
    });

    server_.Get(R"(/api/corrections/([^/]+))", [this](const httplib::Request& req,
                                                      httplib::Response& res) {
      const auto job = store_.Get(req.matches[1]);
      if (!job) return ReplyError(res, 404, "unknown job");
      Reply(res, 200, JobView(*job));
    });

    server_.Get(R"(/api/audio/([^/]+)/([a-z_]+\.wav))", [this](const httplib::Request& req,
                                                               httplib::Response& res) {
      const std::string name = req.matches[2];
      const auto job = store_.Get(req.matches[1]);
      if (!job || (name != kVocoderOnlyWav && name != kGeneratedWav && name != kInputWav))
        return ReplyError(res, 404, "unknown audio");
      if (name != kInputWav && job->state != JobState::kDone)
        return ReplyError(res, 409, "job is " + ToString(job->state));
      ServeWav(res, store_.dir(job->id) / name);
    });

    server_.Get(R"(/api/ab/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto job = store_.Get(req.matches[1]);
      if (!job) return ReplyError(res, 404, "unknown job");
      if (job->state != JobState::kDone) return ReplyError(res, 409, "job is " + ToString(job->state));
      const std::uint64_t seed = SeedParam(req);
      const std::string base = "/api/ab/" + job->id + "/";
      const std::string q = "?seed=" + std::to_string(seed);
      Reply(res, 200,
            {{"job_id", job->id},
             {"seed", seed},
             {"pair", {{{"label", "A"}, {"url", base + "A.wav" + q}},
                       {{"label", "B"}, {"url", base + "B.wav" + q}}}},
             {"reveal_token", RevealToken(job->id, seed)}});
    });

    server_.Get(R"(/api/ab/([^/]+)/([AB])\.wav)", [this](const httplib::Request& req,
                                                        httplib::Response& res) {
      const auto job = store_.Get(req.matches[1]);
      if (!job) return ReplyError(res, 404, "unknown job");
      if (job->state != JobState::kDone) return ReplyError(res, 409, "job is " + ToString(job->state));
      const bool gen_first = GeneratedFirst(job->id, SeedParam(req));
      const bool is_a = req.matches[2] == "A";
      ServeWav(res, store_.dir(job->id) / (is_a == gen_first ? kGeneratedWav : kVocoderOnlyWav));
    });

    server_.Get(R"(/api/ab/([^/]+)/reveal)", [this](const httplib::Request& req,
                                                   httplib::Response& res) {
      const auto job = store_.Get(req.matches[1]);
      if (!job) return ReplyError(res, 404, "unknown job");
      const std::string token = req.get_param_value("token");
      const auto dash = token.find('-');
      std::uint64_t seed = 0;
      try {
        seed = std::stoull(token.substr(0, dash));
      } catch (const std::exception&) {
        return ReplyError(res, 404, "unknown token");
      }
      if (dash == std::string::npos || token != RevealToken(job->id, seed))
        return ReplyError(res, 404, "unknown token");
      const bool gen_first = GeneratedFirst(job->id, seed);
      Reply(res, 200,
            {{"A", gen_first ? "generated" : "vocoder_only"},
             {"B", gen_first ? "vocoder_only" : "generated"}});
    });
  }

  static void ServeWav(httplib::Response& res, const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return service_detail::ReplyError(res, 404, "missing audio");
    const auto bytes = ReadFileBytes(path);
    res.status = 200;
    res.set_content(std::string(bytes.begin(), bytes.end()), "audio/wav");
  }

  void Submit(const httplib::Request& req, httplib::Response& res) {
    using service_detail::ReplyError;
    const auto prompt_id = service_detail::FormValue(req, "prompt_id");
    if (!prompt_id) return ReplyError(res, 422, "missing prompt_id");
    const Prompt* prompt = FindPrompt(*prompt_id);
    if (prompt == nullptr) return ReplyError(res, 404, "unknown prompt '" + *prompt_id + "'");
    if (!req.has_file("audio")) return ReplyError(res, 422, "missing audio");
    const std::string& raw = req.get_file_value("audio").content;
    Waveform wave;
    try {
      wave = DecodeWav(std::span<const std::uint8_t>(
          reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
    } catch (const Error& e) {
      return ReplyError(res, 422, std::string("undecodable audio: ") + e.what());
    }
    if (wave.duration_seconds() > cfg_.max_seconds)
      return ReplyError(res, 413, "recording longer than " + std::to_string(cfg_.max_seconds) + " s");
    if (wave.sample_rate != model_.mel.sample_rate) wave = Resample(wave, model_.mel.sample_rate);
    const int frames = model_.mel.frames_for(wave.size());
    if (frames < model_.params.cfg.tau)
      return ReplyError(res, 422, "utterance too short: " + std::to_string(frames) +
                                      " frames, the model needs " +
                                      std::to_string(model_.params.cfg.tau));
    const auto alignment = service_detail::FormValue(req, "alignment");
    CorrectionJob job = store_.Create(prompt->id);
    WriteWav(store_.dir(job.id) / kInputWav, wave);
    if (alignment) {
      WriteTextFile(store_.dir(job.id) / "alignment.csv", *alignment);
      job.has_alignment = true;
      store_.Update(job);
    }
    {
      std::lock_guard<std::mutex> lock(mu_);
      queue_.push_back(job.id);
    }
    cv_.notify_one();
    service_detail::Reply(res, 202,
                          {{"job_id", job.id},
                           {"state", ToString(job.state)},
                           {"url", "/api/corrections/" + job.id}});
  }

  void WorkerLoop() {
    for (;;) {
      std::string id;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
        if (stopping_) return;
        id = queue_.front();
        queue_.pop_front();
      }
      Process(id);
    }
  }

  void Process(const std::string& id) {
    auto job = store_.Get(id);
    if (!job) return;
    job->state = JobState::kRunning;
    store_.Update(*job);
    try {
      const Prompt* prompt = FindPrompt(job->prompt_id);
      Require(prompt != nullptr, ErrorCode::kInvalidConfig, "prompt vanished");
      const auto dir = store_.dir(id);
      const Waveform wave = LoadWav(dir / kInputWav);
      const int frames = model_.mel.frames_for(wave.size());
      PhonemeSegmentation seg = job->has_alignment
                                    ? ParseAlignmentCsv(ReadTextFile(dir / "alignment.csv"))
                                    : ProportionalAlignment(*prompt, frames);
      Require(seg.phonemes == prompt->phonemes, ErrorCode::kMissingAlignment,
              "alignment phonemes do not match the prompt");
      const auto result = CorrectUtterance({wave, seg, prompt->k, prompt->rho_star}, model_, vocoder_);
      const Waveform plain = vocoder_.Vocode(result.original);
      WriteAtomically(dir / kVocoderOnlyWav, plain);
      WriteAtomically(dir / kGeneratedWav, result.waveform);
      job->state = JobState::kDone;
    } catch (const std::exception& e) {
      job->state = JobState::kFailed;
      job->error = e.what();
      if (job->error.empty()) job->error = "correction failed";
    }
    store_.Update(*job);
  }

  static void WriteAtomically(const std::filesystem::path& path, const Waveform& w) {
    auto tmp = path;
    tmp += ".tmp";
    WriteWav(tmp, w);
    std::filesystem::rename(tmp, path);
  }

  ServiceConfig cfg_;
  GeneratorModel model_;
  std::vector<Prompt> prompts_;
  JobStore store_;
  VocoderAdapter vocoder_;
  std::uint64_t secret_ = 0;
  httplib::Server server_;
  std::thread listener_;
  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> queue_;
  bool stopping_ = false;
};

}  // namespace phonefix
