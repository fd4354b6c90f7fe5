// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch_amalgamated.hpp>

#include <filesystem>

#include "grad_check.hpp"
#include "phonefix/corpus/synth.hpp"
#include "phonefix/model/generator.hpp"

using namespace phonefix;
using phonefix::testing::DirectionalGradCheck;
using phonefix::testing::RandomMat;

namespace {

GeneratorConfig TinyConfig() {
  GeneratorConfig cfg;
  cfg.tau = 8;
  cfg.n_mels = 4;
  cfg.n_phonemes = 5;
  cfg.embed_dim = 3;
  cfg.widths = {2, 2, 2, 2, 2};
  cfg.norm_mean = -3.0f;
  cfg.norm_std = 2.0f;
  return cfg;
}

GeneratorConfig SmallConfig() {
  GeneratorConfig cfg;
  cfg.tau = 32;
  cfg.n_phonemes = 5;
  cfg.embed_dim = 8;
  cfg.widths = {16, 16, 16, 32, 32};
  cfg.norm_mean = -6.0f;
  cfg.norm_std = 3.0f;
  return cfg;
}

template <typename T>
bool SameParams(GeneratorParams<T>& a, GeneratorParams<T>& b) {
  auto ta = a.tensors();
  auto tb = b.tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].first != tb[i].first || *ta[i].second != *tb[i].second) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("init_generator is deterministic and validates tau", "[generator]") {
  auto a = InitGenerator<float>(SmallConfig(), 9);
  auto b = InitGenerator<float>(SmallConfig(), 9);
  auto c = InitGenerator<float>(SmallConfig(), 10);
  CHECK(SameParams(a, b));
  CHECK_FALSE(SameParams(a, c));
  for (auto& [name, m] : a.tensors()) {
    CHECK(m->allFinite());
    if (name.ends_with(".prelu.a")) CHECK((m->array() == 0.25f).all());
  }

  auto bad = SmallConfig();
  bad.tau = 130;
  try {
    InitGenerator<float>(bad, 1);
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidConfig);
  }
  CHECK(RoundUpToMultiple(130, 4) == 132);
  bad.tau = 132;
  CHECK_NOTHROW(InitGenerator<float>(bad, 1));
  bad = SmallConfig();
  bad.embed_dim = 0;
  CHECK_THROWS_AS(InitGenerator<float>(bad, 1), Error);
}

TEST_CASE("embedding table is |P| x embed_dim", "[generator]") {
  auto cfg = SmallConfig();
  cfg.embed_dim = 8;
  auto p = InitGenerator<float>(cfg, 1);
  CHECK(p.embed.table.rows() == 5);
  CHECK(p.embed.table.cols() == 8);
}

TEST_CASE("generate: shape, finiteness, determinism, errors", "[generator]") {
  auto p = InitGenerator<float>(SmallConfig(), 2);
  std::mt19937_64 rng(3);
  MatF window = RandomMat(32, 80, rng, 2.0).cast<float>();
  FramePhonemeSequence labels{std::vector<int>(32, 1)};
  MatF y = Generate(p, window, labels);
  CHECK(y.rows() == 32);
  CHECK(y.cols() == 80);
  CHECK(y.allFinite());
  CHECK(Generate(p, window, labels) == y);

  labels.labels[10] = 3;
  CHECK_FALSE(Generate(p, window, labels) == y);

  MatF short_window = window.topRows(31);
  CHECK_THROWS_AS(Generate(p, short_window, labels), Error);
  FramePhonemeSequence short_labels{std::vector<int>(31, 1)};
  CHECK_THROWS_AS(Generate(p, window, short_labels), Error);
}

TEST_CASE("batched forward equals per-example forward", "[generator]") {
  auto p = InitGenerator<double>(SmallConfig(), 4);
  std::mt19937_64 rng(5);
  MatD x = RandomMat(3 * 32, 80, rng);
  std::vector<int> ids(3 * 32);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i * 7 % 5);
  MatD all = GeneratorForward(p, x, ids, 3, nullptr);
  for (int b = 0; b < 3; ++b) {
    std::vector<int> one(ids.begin() + b * 32, ids.begin() + (b + 1) * 32);
    MatD y = GeneratorForward<double>(p, x.middleRows(b * 32, 32), one, 1, nullptr);
    CHECK((all.middleRows(b * 32, 32) - y).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("generator parameter gradients match finite differences", "[generator][grad]") {
  auto p = InitGenerator<double>(TinyConfig(), 6);
  std::mt19937_64 rng(7);
  const int batch = 2;
  MatD x = RandomMat(batch * 8, 4, rng, 2.0);
  x.middleRows(3, 2).setZero();
  std::vector<int> ids{0, 1, 1, 2, 2, 1, 0, 0, 4, 4, 3, 3, 3, 2, 2, 0};
  MatD r = RandomMat(batch * 8, 4, rng);
  auto loss = [&]() { return GeneratorForward(p, x, ids, batch, nullptr).cwiseProduct(r).sum(); };
  auto grad = nn::ZerosLike(p);
  GeneratorCache<double> cache;
  GeneratorForward(p, x, ids, batch, &cache);
  GeneratorBackward(p, cache, r, grad);
  CHECK(DirectionalGradCheck(p.tensors(), grad.tensors(), loss, 20, 8) < 1e-3);

  // Every weight tensor receives some gradient. A PReLU slope can legitimately
  // get none when all of its inputs are positive.
  for (auto& [name, g] : grad.tensors()) {
    INFO(name);
    if (!name.ends_with(".prelu.a")) CHECK(g->cwiseAbs().sum() > 0);
  }
}

TEST_CASE("generator checkpoint round trip", "[generator][checkpoint]") {
  const auto dir = std::filesystem::temp_directory_path() / "phonefix_ckpt_gen";
  std::filesystem::remove_all(dir);
  GeneratorModel model{InitGenerator<float>(SmallConfig(), 12), DefaultSynthInventory(),
                       MelConfig{}};
  SaveGenerator(dir, model);
  auto loaded = LoadGenerator(dir);
  CHECK(loaded.params.cfg == model.params.cfg);
  CHECK(loaded.inventory == model.inventory);
  CHECK(loaded.mel == model.mel);
  CHECK(SameParams(loaded.params, model.params));
  CHECK_THROWS_AS(LoadGenerator(dir / "nope"), Error);
}

TEST_CASE("normalization statistics over a corpus", "[generator]") {
  SynthConfig cfg;
  cfg.n_items = 3;
  auto items = SynthCorpus(cfg, DefaultSynthInventory());
  auto stats = ComputeNormStats(items);
  double sum = 0, n = 0;
  for (auto& it : items) {
    sum += it.mel.frames.cast<double>().sum();
    n += it.mel.frames.size();
  }
  CHECK(stats.mean == Catch::Approx(sum / n).epsilon(1e-6));
  CHECK(stats.std > 0);
}
