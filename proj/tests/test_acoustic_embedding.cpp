// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "grad_check.hpp"
#include "phonefix/corpus/synth.hpp"
#include "phonefix/model/siamese.hpp"

using namespace phonefix;
using phonefix::testing::DirectionalGradCheck;
using phonefix::testing::RandomMat;

TEST_CASE("cosine similarity values", "[siamese][cosine]") {
  RowVec<float> u(2), v(2), w(2), zero(2);
  u << 1, 0;
  v << 1, 1;
  v /= std::sqrt(2.0f);
  w << 0, 1;
  zero << 0, 0;
  CHECK(CosineSimilarity(u, u).value == Catch::Approx(1.0));
  CHECK(CosineSimilarity(u, w).value == 0.0);
  CHECK(CosineSimilarity(u, v).value == Catch::Approx(std::sqrt(2.0) / 2).epsilon(1e-7));
  auto z = CosineSimilarity(u, zero);
  CHECK(z.value == 0.0);
  CHECK(z.degenerate);
  CHECK_FALSE(CosineSimilarity(u, v).degenerate);
}

TEST_CASE("cosine similarity is symmetric and scale invariant", "[siamese][cosine]") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    RowVec<double> a = RandomMat(1, 16, rng).row(0);
    RowVec<double> b = RandomMat(1, 16, rng).row(0);
    const double alpha = std::exp(nn::UniformRange(rng, -5, 5));
    const double s = CosineSimilarity(a, b).value;
    CHECK(s == Catch::Approx(CosineSimilarity(b, a).value).margin(1e-12));
    CHECK(s == Catch::Approx(CosineSimilarity(RowVec<double>(alpha * a), b).value).margin(1e-12));
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("cosine gradient matches finite differences", "[siamese][cosine][grad]") {
  std::mt19937_64 rng(2);
  RowVec<double> u = RandomMat(1, 6, rng).row(0);
  RowVec<double> v = RandomMat(1, 6, rng).row(0);
  RowVec<double> g = CosineGradU(u, v);
  for (int i = 0; i < 6; ++i) {
    RowVec<double> up = u, dn = u;
    up(i) += 1e-6;
    dn(i) -= 1e-6;
    const double num =
        (CosineSimilarity(up, v).value - CosineSimilarity(dn, v).value) / 2e-6;
    CHECK(g(i) == Catch::Approx(num).epsilon(1e-6));
  }
}

TEST_CASE("init_siamese shapes and determinism", "[siamese]") {
  auto a = InitSiamese<float>(SiameseConfig{}, 3);
  auto b = InitSiamese<float>(SiameseConfig{}, 3);
  CHECK(a.proj.w.rows() == 600);
  CHECK(a.proj.w.cols() == 128);
  CHECK(a.forward_gru.hidden == 300);
  auto ta = a.tensors();
  auto tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i].second == *tb[i].second);
  SiameseConfig bad;
  bad.hidden = 0;
  CHECK_THROWS_AS(InitSiamese<float>(bad, 1), Error);
}

TEST_CASE("embed_acoustic contract", "[siamese]") {
  SiameseConfig cfg;
  cfg.norm_mean = -6.0f;
  cfg.norm_std = 3.0f;
  auto p = InitSiamese<float>(cfg, 4);
  std::mt19937_64 rng(5);
  MatF seg = RandomMat(12, 80, rng, 3.0).cast<float>();
  auto e = EmbedAcoustic(p, seg);
  CHECK(e.size() == 128);
  CHECK((e.array() >= 0).all());
  CHECK(e.allFinite());
  CHECK(EmbedAcoustic(p, seg) == e);
  MatF empty(0, 80);
  try {
    EmbedAcoustic(p, empty);
    FAIL("expected EmptySegment");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kEmptySegment);
  }

  // Batch order does not matter.
  MatF other = RandomMat(5, 80, rng, 3.0).cast<float>();
  MatF ab = SiameseForward<float>(p, {seg, other}, nullptr);
  MatF ba = SiameseForward<float>(p, {other, seg}, nullptr);
  CHECK((ab.row(0) - ba.row(1)).cwiseAbs().maxCoeff() < 1e-5f);
  CHECK((ab.row(1) - ba.row(0)).cwiseAbs().maxCoeff() < 1e-5f);
  CHECK((ab.row(0) - e).cwiseAbs().maxCoeff() < 1e-5f);
}

TEST_CASE("fresh embedder gives a spread of similarities", "[siamese]") {
  SynthConfig scfg;
  scfg.n_items = 12;
  auto items = SynthCorpus(scfg, DefaultSynthInventory());
  SiameseConfig cfg;
  cfg.norm_mean = -6.0f;
  cfg.norm_std = 3.0f;
  auto p = InitSiamese<float>(cfg, 6);
  std::vector<MatF> segs;
  for (const auto& item : items) {
    for (int k = 0; k < item.segmentation.size(); ++k) segs.push_back(SegmentFrames(item, k));
  }
  std::mt19937_64 rng(7);
  std::vector<double> sims;
  for (int i = 0; i < 100; ++i) {
    const auto a = rng() % segs.size();
    const auto b = rng() % segs.size();
    sims.push_back(CosineSimilarity(EmbedAcoustic(p, segs[a]), EmbedAcoustic(p, segs[b])).value);
  }
  const auto [lo, hi] = std::minmax_element(sims.begin(), sims.end());
  CHECK(*hi - *lo > 0.05);
}

TEST_CASE("siamese gradients w.r.t. parameters and inputs", "[siamese][grad]") {
  SiameseConfig cfg;
  cfg.n_mels = 4;
  cfg.hidden = 3;
  cfg.embed_dim = 5;
  cfg.norm_mean = 1.0f;
  cfg.norm_std = 2.0f;
  auto p = InitSiamese<double>(cfg, 8);
  std::mt19937_64 rng(9);
  std::vector<MatD> segs{RandomMat(5, 4, rng), RandomMat(2, 4, rng)};
  MatD r = RandomMat(2, 5, rng);
  // Bias the projection so most ReLUs are active.
  p.proj.b.setConstant(0.5);
  auto loss = [&]() { return SiameseForward(p, segs, nullptr).cwiseProduct(r).sum(); };
  auto grad = nn::ZerosLike(p);
  SiameseCache<double> cache;
  SiameseForward(p, segs, &cache);
  auto dx = SiameseBackward(p, cache, r, &grad);
  CHECK(DirectionalGradCheck(p.tensors(), grad.tensors(), loss, 20, 10) < 1e-6);
  for (int i = 0; i < 4; ++i) {
    segs[0](1, i) += 1e-6;
    const double plus = loss();
    segs[0](1, i) -= 2e-6;
    const double minus = loss();
    segs[0](1, i) += 1e-6;
    CHECK(phonefix::testing::RelErr(dx[0](1, i), (plus - minus) / 2e-6) < 1e-6);
  }
}

TEST_CASE("siamese checkpoint round trip", "[siamese][checkpoint]") {
  const auto dir = std::filesystem::temp_directory_path() / "phonefix_ckpt_siamese";
  std::filesystem::remove_all(dir);
  SiameseConfig cfg;
  cfg.hidden = 16;
  cfg.embed_dim = 8;
  SiameseModel model{InitSiamese<float>(cfg, 13), DefaultSynthInventory(), MelConfig{}};
  SaveSiamese(dir, model);
  auto loaded = LoadSiamese(dir);
  CHECK(loaded.params.cfg == cfg);
  auto ta = loaded.params.tensors();
  auto tb = model.params.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i].second == *tb[i].second);
}
