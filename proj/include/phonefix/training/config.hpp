// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "phonefix/error.hpp"

namespace phonefix {

struct TrainConfig {
  int epochs = 450;
  int batch_size = 100;
  double learning_rate = 1e-4;
  int patience = 20;
  std::uint64_t seed = 0;
  double lambda1 = 1.0;  // masked-region L1
  double lambda2 = 1.0;  // context-region L1
  double lambda_attract = 0.1;
  double lambda_contrast = 0.1;
  // Reference segments drawn per example for the embedding terms.
  int n_refs = 4;
  // Stop after this many optimizer steps; 0 means no limit.
  int max_steps = 0;
  // "constant" or "cosine" (decays to learning_rate * min_lr_factor at the
  // last step).
  std::string lr_schedule = "constant";
  double min_lr_factor = 0.0;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
  // Siamese pair objective.
  double margin = 0.3;
  int validation_pairs = 200;
  // JSON-lines log; empty disables.
  std::string log_path;

  void Validate() const {
    Require(epochs >= 0, ErrorCode::kInvalidConfig, "epochs must be >= 0");
    Require(batch_size >= 1, ErrorCode::kInvalidConfig, "batch_size must be >= 1");
    Require(learning_rate > 0, ErrorCode::kInvalidConfig, "learning_rate must be positive");
    Require(patience >= 1, ErrorCode::kInvalidConfig, "patience must be >= 1");
    Require(lambda1 >= 0 && lambda2 >= 0 && lambda_attract >= 0 && lambda_contrast >= 0,
            ErrorCode::kInvalidConfig, "loss weights must be non-negative");
    Require(n_refs >= 1, ErrorCode::kInvalidConfig, "n_refs must be >= 1");
    Require(max_steps >= 0 && clip_norm >= 0, ErrorCode::kInvalidConfig,
            "max_steps and clip_norm must be non-negative");
    Require(lr_schedule == "constant" || lr_schedule == "cosine", ErrorCode::kInvalidConfig,
            "lr_schedule must be constant or cosine");
    Require(min_lr_factor >= 0 && min_lr_factor <= 1, ErrorCode::kInvalidConfig,
            "min_lr_factor must be in [0, 1]");
    Require(validation_pairs >= 1, ErrorCode::kInvalidConfig, "validation_pairs must be >= 1");
  }
};

inline nlohmann::json TrainConfigToJson(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"patience", c.patience},
          {"seed", c.seed},
          {"lambda1", c.lambda1},
          {"lambda2", c.lambda2},
          {"lambda_attract", c.lambda_attract},
          {"lambda_contrast", c.lambda_contrast},
          {"n_refs", c.n_refs},
          {"max_steps", c.max_steps},
          {"lr_schedule", c.lr_schedule},
          {"min_lr_factor", c.min_lr_factor},
          {"clip_norm", c.clip_norm},
          {"margin", c.margin},
          {"validation_pairs", c.validation_pairs},
          {"log_path", c.log_path}};
}

inline TrainConfig TrainConfigFromJson(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    c.lambda1 = j.value("lambda1", c.lambda1);
    c.lambda2 = j.value("lambda2", c.lambda2);
    c.lambda_attract = j.value("lambda_attract", c.lambda_attract);
    c.lambda_contrast = j.value("lambda_contrast", c.lambda_contrast);
    c.n_refs = j.value("n_refs", c.n_refs);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.lr_schedule = j.value("lr_schedule", c.lr_schedule);
    c.min_lr_factor = j.value("min_lr_factor", c.min_lr_factor);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.margin = j.value("margin", c.margin);
    c.validation_pairs = j.value("validation_pairs", c.validation_pairs);
    c.log_path = j.value("log_path", c.log_path);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kInvalidConfig, std::string("train config: ") + e.what());
  }
  c.Validate();
  return c;
}

// Learning rate for 0-based step `step` out of `total_steps`.
inline double ScheduledLearningRate(const TrainConfig& c, int step, int total_steps) {
  if (c.lr_schedule != "cosine" || total_steps <= 1) return c.learning_rate;
  const double t = std::min(1.0, static_cast<double>(step) / (total_steps - 1));
  const double lo = c.learning_rate * c.min_lr_factor;
  return lo + 0.5 * (c.learning_rate - lo) * (1.0 + std::cos(M_PI * t));
}

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  nlohmann::json extra = nlohmann::json::object();
};

struct TrainReport {
  std::vector<EpochLog> epochs;
  // Training loss of every optimizer step, in order.
  std::vector<double> step_losses;
  int best_epoch = -1;
  double best_validation_loss = std::numeric_limits<double>::infinity();
  std::string checkpoint_path;
  bool stopped_early = false;

  nlohmann::json ToJson() const {
    nlohmann::json e = nlohmann::json::array();
    for (const auto& log : epochs) {
      e.push_back({{"epoch", log.epoch},
                   {"train_loss", log.train_loss},
                   {"validation_loss", log.validation_loss},
                   {"extra", log.extra}});
    }
    return {{"epochs", e},
            {"steps", step_losses.size()},
            {"best_epoch", best_epoch},
            {"best_validation_loss", best_validation_loss},
            {"checkpoint_path", checkpoint_path},
            {"stopped_early", stopped_early}};
  }
};

// Appends one JSON object per line.
class JsonLinesLog {
 public:
  explicit JsonLinesLog(const std::string& path) {
    if (path.empty()) return;
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    out_.open(p, std::ios::app);
    Require(static_cast<bool>(out_), ErrorCode::kIo, "cannot open log " + path);
  }

  void Write(const EpochLog& log) {
    if (!out_.is_open()) return;
    nlohmann::json j = {{"epoch", log.epoch},
                        {"train_loss", log.train_loss},
                        {"validation_loss", log.validation_loss},
                        {"timestamp", std::chrono::duration<double>(
                                          std::chrono::system_clock::now().time_since_epoch())
                                          .count()}};
    for (auto& [k, v] : log.extra.items()) j[k] = v;
    out_ << j.dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

}  // namespace phonefix
