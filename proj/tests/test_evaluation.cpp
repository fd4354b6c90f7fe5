// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "phonefix/corpus/synth.hpp"
#include "phonefix/evaluation/listening.hpp"
#include "phonefix/training/train_generator.hpp"
#include "phonefix/training/train_siamese.hpp"

using namespace phonefix;

namespace {

std::vector<CorpusItem> Corpus(int n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_items = n;
  return SynthCorpus(cfg, DefaultSynthInventory());
}

SiameseParams<float> TrainedSiamese(const std::vector<CorpusItem>& items, int epochs) {
  SiameseConfig arch;
  arch.hidden = 24;
  arch.embed_dim = 16;
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 16;
  cfg.learning_rate = 3e-3;
  cfg.seed = 8;
  CorpusSplit split;
  for (const auto& i : items) split.train.push_back(i.id);
  return TrainSiamese(items, split, DefaultSynthInventory(), arch, cfg).first;
}

GeneratorModel TinyGenerator(const std::vector<CorpusItem>& items) {
  const auto inv = DefaultSynthInventory();
  GeneratorConfig cfg;
  cfg.n_phonemes = inv.size();
  cfg.embed_dim = 4;
  cfg.widths = {8, 8, 8, 8, 8};
  cfg.tau = DeriveTau(items, inv, {1, 2, 3, 4});
  return {InitGenerator<float>(cfg, 2), inv, MelConfig{}};
}

}  // namespace

TEST_CASE("spectral_metrics", "[evaluation][metrics]") {
  const MatF b = MatF::Ones(2, 2);
  const MatF a = b.array() + 1.0f;
  auto same = ComputeSpectralMetrics(b, b);
  CHECK(same.l1 == 0.0);
  CHECK(same.spectral_convergence == 0.0);
  auto m = ComputeSpectralMetrics(a, b);
  CHECK(m.l1 == Catch::Approx(1.0));
  CHECK(m.spectral_convergence == Catch::Approx(1.0));

  MatF x = MatF::Zero(10, 3);
  MatF y = MatF::Zero(10, 3);
  x.row(2).setConstant(4.0f);
  y.row(7).setConstant(1.0f);
  y.row(3).setConstant(2.0f);
  const WindowSpec region{2, 3, 0, 0};  // frames 2, 3, 4
  auto r = ComputeSpectralMetrics(x, y, region);
  CHECK(r.l1 == Catch::Approx((4.0 * 3 + 2.0 * 3) / 9.0));
  CHECK(r.spectral_convergence == Catch::Approx(std::sqrt(48.0 + 12.0) / std::sqrt(12.0)));
  CHECK_THROWS_AS(ComputeSpectralMetrics(x, MatF::Zero(9, 3)), Error);
  CHECK_THROWS_AS(ComputeSpectralMetrics(x, y, WindowSpec{9, 3, 0, 0}), Error);
}

TEST_CASE("phoneme_identity_score", "[evaluation][oracle]") {
  const auto inv = DefaultSynthInventory();
  SiameseConfig arch;
  arch.hidden = 6;
  arch.embed_dim = 4;
  const auto siamese = InitSiamese<float>(arch, 3);
  std::mt19937_64 rng(4);
  MatF seg(5, 80);
  for (long i = 0; i < seg.size(); ++i) seg.data()[i] = static_cast<float>(nn::UniformRange(rng, -8, 0));

  Centroids one{{3, RowVec<float>::Ones(4)}};
  CHECK(PhonemeIdentityScore(seg, siamese, one, inv).symbol == "C");

  RowVec<float> c(4);
  c << 0.3f, -0.1f, 0.7f, 0.2f;
  Centroids tie{{4, c}, {2, c}, {1, -c}};
  const auto e = EmbedAcoustic(siamese, seg);
  const auto s = PhonemeIdentityScore(seg, siamese, tie, inv);
  if (CosineSimilarity(e, c).value > CosineSimilarity(e, -c).value) {
    CHECK(s.symbol == "B");
  } else {
    CHECK(s.symbol == "A");
  }
  CHECK_THROWS_AS(PhonemeIdentityScore(MatF(0, 80), siamese, one, inv), Error);
  CHECK_THROWS_AS(PhonemeIdentityScore(seg, siamese, {}, inv), Error);
}

TEST_CASE("oracle self-consistency on training segments", "[evaluation][oracle][slow]") {
  const auto items = Corpus(24, 31);
  const auto inv = DefaultSynthInventory();
  const auto siamese = TrainedSiamese(items, 20);
  const auto centroids = ComputeCentroids(siamese, items, inv);
  REQUIRE(centroids.size() == 4);
  int right = 0;
  int total = 0;
  for (const auto& item : items) {
    const auto& seg = item.segmentation;
    for (int k = 0; k < seg.size(); ++k) {
      const auto& p = seg.phonemes[static_cast<std::size_t>(k)];
      if (p == "sil") continue;
      const MatF frames = item.mel.frames.middleRows(seg.begin(k), seg.duration(k));
      right += PhonemeIdentityScore(frames, siamese, centroids, inv).symbol == p;
      ++total;
    }
  }
  INFO(right << " / " << total);
  CHECK(right >= 0.95 * total);
}

TEST_CASE("minimal pair experiment contracts", "[evaluation][experiment]") {
  const auto items = Corpus(16, 9);
  const auto inv = DefaultSynthInventory();
  std::vector<CorpusItem> train(items.begin(), items.begin() + 12);
  std::vector<CorpusItem> test(items.begin() + 12, items.end());
  const auto siamese = TrainedSiamese(train, 2);
  const auto centroids = ComputeCentroids(siamese, train, inv);
  const auto gen = TinyGenerator(items);
  const auto voc = VocoderAdapter::GriffinLimVocoder(8);
  ExperimentConfig cfg;
  cfg.through_vocoder = false;
  cfg.seed = 3;

  SECTION("empty pair list") {
    const auto r = RunMinimalPairExperiment(test, {}, nullptr, nullptr, centroids, voc, train, cfg);
    CHECK(r.report.empty());
    CHECK(r.report.ToJson()["conditions"].empty());
  }

  SECTION("missing inputs") {
    auto code_of = [&](auto f) {
      try {
        f();
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::kIo;
    };
    CHECK(code_of([&] {
            RunMinimalPairExperiment(test, {{"A", "B"}}, nullptr, &siamese, centroids, voc, train, cfg);
          }) == ErrorCode::kModelMissing);
    CHECK(code_of([&] {
            RunMinimalPairExperiment(test, {{"A", "B"}}, &gen, nullptr, centroids, voc, train, cfg);
          }) == ErrorCode::kModelMissing);
    std::vector<CorpusItem> no_a = test;
    for (auto& item : no_a)
      for (auto& p : item.segmentation.phonemes)
        if (p == "A") p = "C";
    CHECK(code_of([&] {
            RunMinimalPairExperiment(no_a, {{"A", "B"}}, &gen, &siamese, centroids, voc, train, cfg);
          }) == ErrorCode::kPhonemeAbsent);
  }

  SECTION("bookkeeping and reproducibility") {
    const std::vector<std::pair<std::string, std::string>> pairs = {{"A", "B"}, {"C", "C"}};
    const auto r1 = RunMinimalPairExperiment(test, pairs, &gen, &siamese, centroids, voc, train, cfg);
    const auto r2 = RunMinimalPairExperiment(test, pairs, &gen, &siamese, centroids, voc, train, cfg);
    CHECK(r1.report.ToJson() == r2.report.ToJson());
    int occurrences = 0;
    for (const auto& item : test)
      for (const auto& p : item.segmentation.phonemes) occurrences += (p == "A" || p == "C");
    const auto& conds = r1.report.conditions;
    REQUIRE(conds.count(kVocoderOnly) == 1);
    CHECK(conds.at(kVocoderOnly).n + r1.report.skipped == occurrences);
    for (const auto& [name, o] : conds) {
      CHECK(o.accurate + o.switched + o.none == o.n);
      CHECK(o.accuracy() + o.switched_rate() + o.none_rate() <= 1.0 + 1e-12);
      CHECK(o.accuracy() * o.n == Catch::Approx(o.accurate));
    }
    // Without the vocoder the untouched rendering is the training mel itself.
    CHECK(conds.at(kVocoderOnly).context_l1() == 0.0);
    CHECK(conds.at(kGenerated).context_l1() == 0.0);
    const auto md = r1.report.ToMarkdown();
    CHECK(md.find("| Accuracy |") != std::string::npos);
    CHECK(md.find("ρ* = B") != std::string::npos);
    CHECK(md.find("not comparable") != std::string::npos);
  }
}

TEST_CASE("listening manifest export", "[evaluation][manifest]") {
  const auto items = Corpus(4, 12);
  const auto inv = DefaultSynthInventory();
  std::vector<Stimulus> stimuli;
  for (int i = 0; i < 2; ++i) {
    Stimulus s;
    s.id = "generated_" + std::to_string(i);
    s.condition = kGenerated;
    s.item_id = items[static_cast<std::size_t>(i)].id;
    s.segment = 1;
    s.original_phoneme = items[static_cast<std::size_t>(i)].segmentation.phonemes[1];
    s.target_phoneme = s.original_phoneme == "B" ? "C" : "B";
    s.original_transcription = Transcription(items[static_cast<std::size_t>(i)].segmentation, inv);
    s.target_transcription =
        Transcription(items[static_cast<std::size_t>(i)].segmentation, inv, 1, s.target_phoneme);
    s.predicted = s.target_phoneme;
    s.waveform = items[static_cast<std::size_t>(i)].waveform;
    stimuli.push_back(s);
  }
  Stimulus ref = stimuli[0];
  ref.id = "vocoder_only_0";
  ref.condition = kVocoderOnly;
  stimuli.push_back(ref);

  const std::filesystem::path dir = PHONEFIX_ARTIFACT_DIR "/listening";
  std::filesystem::remove_all(dir);
  const std::uint64_t seed = 77;
  const auto m = ExportListeningManifest(stimuli, dir, seed);
  REQUIRE(m["abx_tasks"].size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    const auto& task = m["abx_tasks"][t];
    REQUIRE(task["options"].size() == 4);
    const auto perm = task["option_order"].get<std::vector<int>>();
    CHECK(perm == OptionPermutation(seed, t));
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(task["options"][i]["kind"] == kAbxOptionKinds[static_cast<std::size_t>(perm[i])]);
    std::set<std::string> kinds;
    for (const auto& o : task["options"]) kinds.insert(o["kind"].get<std::string>());
    CHECK(kinds.size() == 4);
  }
  const auto& first = m["abx_tasks"][0]["options"];
  for (const auto& o : first) {
    if (o["kind"] == "target") CHECK(o["label"] == stimuli[0].target_transcription);
    if (o["kind"] == "minimal_pair") CHECK(o["label"] == stimuli[0].original_transcription);
  }
  // The untouched rendering's target is the original word.
  for (const auto& o : m["abx_tasks"][2]["options"])
    if (o["kind"] == "target") CHECK(o["label"] == ref.original_transcription);
  REQUIRE(m["mos_pairs"].size() == 1);
  CHECK(m["mos_pairs"][0]["reference"] == "vocoder_only_0");
  CHECK(m["mos_pairs"][0]["candidate"] == "generated_0");
  for (const auto& s : m["stimuli"]) CHECK(std::filesystem::exists(dir / s["file"].get<std::string>()));
  CHECK(nlohmann::json::parse(ReadTextFile(dir / "manifest.json")) == m);

  // Different seeds give different orders somewhere.
  bool differs = false;
  for (std::size_t t = 0; t < 8; ++t) differs = differs || OptionPermutation(1, t) != OptionPermutation(2, t);
  CHECK(differs);
}
