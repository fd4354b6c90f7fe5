// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <set>

#include "phonefix/baseline/concat.hpp"
#include "phonefix/corpus/synth.hpp"

using namespace phonefix;

namespace {

Waveform Sine(std::size_t n, double period, double phase, float amp = 0.5f) {
  Waveform w;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    w.samples[i] = amp * static_cast<float>(std::sin(2 * std::numbers::pi * i / period + phase));
  return w;
}

CorpusItem Item(const std::string& id, const std::string& speaker, Gender g,
                std::vector<std::string> phonemes, std::vector<std::string> words) {
  CorpusItem it;
  it.id = id;
  it.speaker_id = speaker;
  it.gender = g;
  it.words = std::move(words);
  it.segmentation.phonemes = std::move(phonemes);
  for (int i = 0; i < it.segmentation.size(); ++i) it.segmentation.start_frames.push_back(i * 10);
  it.segmentation.total_frames = it.segmentation.size() * 10;
  return it;
}

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

}  // namespace

TEST_CASE("select_donor", "[baseline][donor]") {
  std::vector<CorpusItem> corpus = {
      Item("a", "s1", Gender::kMale, {"sil", "A", "B"}, {"ab"}),
      Item("b", "s2", Gender::kFemale, {"sil", "B", "B"}, {"bb"}),
      Item("c", "s3", Gender::kMale, {"sil", "C", "A"}, {"ca"}),
  };

  SECTION("single qualifying occurrence") {
    const auto d = SelectDonor(corpus, {"B", Gender::kMale, std::nullopt}, "s9", 1);
    CHECK(d.item_id == "a");
    CHECK(d.segment == 2);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto e = SelectDonor(corpus, {"A", Gender::kMale, std::nullopt}, "s1", seed);
      CHECK(e.item_id == "c");
      CHECK(e.segment == 2);
    }
  }

  SECTION("no candidates") {
    CHECK(CodeOf([&] { SelectDonor(corpus, {"B", Gender::kMale, std::nullopt}, "s1", 0); }) ==
          ErrorCode::kNoDonor);
    CHECK(CodeOf([&] { SelectDonor(corpus, {"D", Gender::kFemale, std::nullopt}, "", 0); }) ==
          ErrorCode::kNoDonor);
    CHECK(CodeOf([&] { SelectDonor({}, {"A", Gender::kMale, std::nullopt}, "", 0); }) ==
          ErrorCode::kNoDonor);
  }

  SECTION("preferred word restricts the pool") {
    std::vector<CorpusItem> many;
    for (int i = 0; i < 10; ++i) {
      const bool match = i == 3 || i == 7;
      many.push_back(Item("u" + std::to_string(i), "s" + std::to_string(i), Gender::kFemale,
                          {"sil", "R", "A"}, {match ? "rat" : "ran"}));
    }
    std::set<std::string> seen;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto d = SelectDonor(many, {"R", Gender::kFemale, std::string("rat")}, "x", seed);
      seen.insert(d.item_id);
    }
    CHECK(seen == std::set<std::string>{"u3", "u7"});
    seen.clear();
    for (std::uint64_t seed = 0; seed < 100; ++seed)
      seen.insert(SelectDonor(many, {"R", Gender::kFemale, std::string("zzz")}, "x", seed).item_id);
    CHECK(seen.size() == 10);
  }

  SECTION("same seed, same choice") {
    const auto a = SelectDonor(corpus, {"B", Gender::kUnknown, std::nullopt}, "", 42);
    const auto b = SelectDonor(corpus, {"B", Gender::kUnknown, std::nullopt}, "", 42);
    CHECK(a.item_id == b.item_id);
    CHECK(a.segment == b.segment);
  }
}

TEST_CASE("smooth_concat", "[baseline][concat]") {
  SECTION("own segment at radius 0 is the identity") {
    Waveform r = Sine(4000, 37.3, 0.2);
    for (std::size_t i = 0; i < r.size(); ++i) r.samples[i] += 0.001f * static_cast<float>(i % 17);
    const auto out = SmoothConcatSamples(r, 1000, 2500, {r, 1000, 2500}, 220, 0);
    CHECK(out.waveform.samples == r.samples);
    CHECK(out.offset == 0);
  }

  SECTION("constant inputs stay constant") {
    Waveform r{std::vector<float>(3000, 0.3f), kCanonicalSampleRate};
    Waveform d{std::vector<float>(5000, 0.3f), kCanonicalSampleRate};
    const auto out = SmoothConcatSamples(r, 800, 1600, {d, 2000, 3200}, 220, 110);
    for (float s : out.waveform.samples) CHECK(s == Catch::Approx(0.3f));
    CHECK(out.waveform.size() == 3000 - 800 + 1200);
  }

  SECTION("phase search picks the exhaustive optimum") {
    const double period = 50.0;
    Waveform r = Sine(6000, period, 0.0);
    Waveform d = Sine(8000, period, 2 * std::numbers::pi * 12 / period);  // 12-sample lag
    const std::size_t fade = 220;
    const long radius = 60;  // more than one period
    const DonorSegment donor{d, 3000, 4700};
    const auto out = SmoothConcatSamples(r, 2000, 3000, donor, fade, radius);
    CHECK(out.join_distance <= out.join_distance_at_zero);
    CHECK(out.join_distance < 1e-3 * out.join_distance_at_zero);
    // Brute force over every admissible shift.
    double best = std::numeric_limits<double>::infinity();
    long best_o = 0;
    for (long o = -radius; o <= radius; ++o) {
      const std::size_t h = fade / 2;
      const double c = JoinDistance(r, 2000 - h, d, 3000 + o - h, fade) +
                       JoinDistance(d, 4700 + o - h, r, 3000 - h, fade);
      if (c < best || (c == best && std::abs(o) < std::abs(best_o))) {
        best = c;
        best_o = o;
      }
    }
    CHECK(out.join_distance == best);
    CHECK(out.offset == best_o);
    CHECK(out.waveform.size() == 6000 - 1000 + 1700);
  }

  SECTION("length accounting") {
    Waveform r = Sine(5000, 31.0, 0.0);
    Waveform d = Sine(9000, 29.0, 0.5);
    for (std::size_t len : {300u, 1024u, 2500u}) {
      const auto out = SmoothConcatSamples(r, 1500, 2700, {d, 4000, 4000 + len}, 220, 110);
      CHECK(out.waveform.size() == 5000 - 1200 + len);
    }
  }

  SECTION("errors") {
    Waveform r = Sine(3000, 31.0, 0.0);
    Waveform d = Sine(3000, 31.0, 0.0);
    d.sample_rate = 16000;
    CHECK(CodeOf([&] { SmoothConcatSamples(r, 1000, 2000, {d, 1000, 2000}, 220, 0); }) ==
          ErrorCode::kRateMismatch);
    d.sample_rate = r.sample_rate;
    CHECK(CodeOf([&] { SmoothConcatSamples(r, 50, 2000, {d, 1000, 2000}, 220, 0); }) ==
          ErrorCode::kFadeOutOfRange);
    CHECK(CodeOf([&] { SmoothConcatSamples(r, 1000, 2000, {d, 50, 2000}, 220, 0); }) ==
          ErrorCode::kFadeOutOfRange);
    CHECK(CodeOf([&] { SmoothConcatSamples(r, 1000, 2000, {d, 1000, 1100}, 220, 0); }) ==
          ErrorCode::kFadeOutOfRange);
  }

  SECTION("frame-level wrapper on the synthetic corpus") {
    SynthConfig cfg;
    cfg.n_items = 12;
    const auto corpus = SynthCorpus(cfg, DefaultSynthInventory());
    const auto& rec = corpus[0];
    const int k = 1;
    const auto d = SelectDonor(corpus, {"A", rec.gender, std::nullopt}, rec.speaker_id, 7);
    const auto donor = DonorFromItem(corpus[d.item], d.segment);
    const auto out = SmoothConcat(rec.waveform, rec.segmentation, k, donor);
    const auto [a, b] = SegmentSamples(rec.segmentation, k, 256, rec.waveform.size());
    CHECK(out.waveform.size() == rec.waveform.size() - (b - a) + donor.length());
    CHECK(std::abs(out.offset) <= 110);
    CHECK(ConcatParams{}.fade_len(kCanonicalSampleRate) == 221);
  }
}
