// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Reads CKPT_DIR, PROMPTS_PATH, JOBS_DIR and PORT from the environment.

#include <csignal>
#include <iostream>

#include "phonefix/service/server.hpp"

namespace {
phonefix::CorrectionService* g_service = nullptr;
void OnSignal(int) {
  if (g_service != nullptr) g_service->Stop();
}
}  // namespace

int main() {
  try {
    const auto cfg = phonefix::ServiceConfig::FromEnv();
    phonefix::CorrectionService service(cfg);
    g_service = &service;
    std::signal(SIGINT, OnSignal);
    std::signal(SIGTERM, OnSignal);
    std::cerr << "serving " << service.prompts().size() << " prompts on " << cfg.host << ":"
              << cfg.port << "\n";
    service.Run();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
