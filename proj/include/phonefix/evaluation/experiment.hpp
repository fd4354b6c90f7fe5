// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Minimal-pair correction scored by an embedding oracle instead of listeners.
// Each test occurrence of p is rendered three ways (original through the
// vocoder, regenerated as q, spliced with a donor q) and the replaced region
// is classified by nearest phoneme centroid.

#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "phonefix/baseline/concat.hpp"
#include "phonefix/evaluation/metrics.hpp"
#include "phonefix/pipeline/correction.hpp"

namespace phonefix {

inline constexpr const char* kVocoderOnly = "vocoder_only";
inline constexpr const char* kGenerated = "generated";
inline constexpr const char* kSmoothConcat = "smooth_concat";
inline constexpr const char* kOracleDisclaimer =
    "Scores come from a nearest-centroid embedding classifier, not from human listeners, "
    "and are not comparable to listening-test rates.";

struct OutcomeCounts {
  int n = 0;
  int accurate = 0;
  int switched = 0;
  int none = 0;
  double context_l1_sum = 0;
  double convergence_sum = 0;

  double rate(int count) const { return n ? static_cast<double>(count) / n : 0.0; }
  double accuracy() const { return rate(accurate); }
  double switched_rate() const { return rate(switched); }
  double none_rate() const { return rate(none); }
  double context_l1() const { return n ? context_l1_sum / n : 0.0; }
  double spectral_convergence() const { return n ? convergence_sum / n : 0.0; }

  nlohmann::json ToJson() const {
    return {{"n", n},
            {"accurate", accurate},
            {"switched", switched},
            {"none", none},
            {"accuracy", accuracy()},
            {"switched_rate", switched_rate()},
            {"none_rate", none_rate()},
            {"context_l1", context_l1()},
            {"spectral_convergence", spectral_convergence()}};
  }
};

struct EvalReport {
  std::vector<std::pair<std::string, std::string>> pairs;  // (p, q)
  std::map<std::string, OutcomeCounts> conditions;
  // condition -> target symbol -> counts
  std::map<std::string, std::map<std::string, OutcomeCounts>> per_target;
  int skipped = 0;  // occurrences that do not fit the window
  int no_donor = 0;

  bool empty() const { return conditions.empty(); }

  nlohmann::json ToJson() const {
    nlohmann::json j;
    j["note"] = kOracleDisclaimer;
    j["pairs"] = nlohmann::json::array();
    for (const auto& [p, q] : pairs) j["pairs"].push_back({p, q});
    j["conditions"] = nlohmann::json::object();
    for (const auto& [c, o] : conditions) j["conditions"][c] = o.ToJson();
    j["per_target"] = nlohmann::json::object();
    for (const auto& [c, m] : per_target)
      for (const auto& [t, o] : m) j["per_target"][c][t] = o.ToJson();
    j["skipped"] = skipped;
    j["no_donor"] = no_donor;
    return j;
  }

  std::string ToMarkdown() const {
    const std::vector<std::string> order = {kVocoderOnly, kGenerated, kSmoothConcat};
    std::vector<std::string> cols;
    for (const auto& c : order)
      if (conditions.count(c)) cols.push_back(c);
    std::ostringstream out;
    out << "# Minimal-pair correction (oracle)\n\n" << kOracleDisclaimer << "\n\n";
    if (cols.empty()) {
      out << "No trials.\n";
      return out.str();
    }
    auto pct = [](double v) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(1) << 100.0 * v << "%";
      return s.str();
    };
    out << "| |";
    for (const auto& c : cols) out << " " << c << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) out << "---|";
    out << "\n";
    auto row = [&](const std::string& name, auto get) {
      out << "| " << name << " |";
      for (const auto& c : cols) out << " " << get(conditions.at(c)) << " |";
      out << "\n";
    };
    row("Accuracy", [&](const OutcomeCounts& o) { return pct(o.accuracy()); });
    row("Switched", [&](const OutcomeCounts& o) { return pct(o.switched_rate()); });
    row("None of the above", [&](const OutcomeCounts& o) { return pct(o.none_rate()); });
    std::set<std::string> targets;
    for (const auto& [c, m] : per_target)
      for (const auto& [t, o] : m) targets.insert(t);
    for (const auto& t : targets) {
      out << "| ρ* = " << t << " |";
      for (const auto& c : cols) {
        const auto& m = per_target.at(c);
        const auto it = m.find(t);
        out << " " << (it == m.end() ? std::string("-") : pct(it->second.accuracy())) << " |";
      }
      out << "\n";
    }
    row("n", [](const OutcomeCounts& o) { return std::to_string(o.n); });
    row("Context L1", [](const OutcomeCounts& o) {
      std::ostringstream s;
      s << std::setprecision(4) << o.context_l1();
      return s.str();
    });
    return out.str();
  }
};

struct Stimulus {
  std::string id;
  std::string condition;
  std::string item_id;
  int segment = 0;
  std::string original_phoneme;
  std::string target_phoneme;
  std::string original_transcription;  // space-separated, silences dropped
  std::string target_transcription;
  std::string predicted;
  Waveform waveform;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  ConcatParams concat;
  bool through_vocoder = true;  // classify the re-analyzed vocoder output
  int max_occurrences_per_pair = 0;  // 0 keeps all
  bool keep_stimuli = false;
  int context_guard = 4;  // frames excluded around the replaced region
};

struct ExperimentResult {
  EvalReport report;
  std::vector<Stimulus> stimuli;
};

inline std::string Transcription(const PhonemeSegmentation& seg, const PhonemeInventory& inv,
                                 int replace_k = -1, const std::string& with = "") {
  std::string out;
  for (int k = 0; k < seg.size(); ++k) {
    const auto& p = seg.phonemes[static_cast<std::size_t>(k)];
    if (p == inv.silence_symbol()) continue;
    if (!out.empty()) out += ' ';
    out += k == replace_k ? with : p;
  }
  return out;
}

namespace eval_detail {

// Context fidelity outside [lo - guard, hi + guard). Frames after the region
// are compared with a shift of `shift` output frames.
inline SpectralMetrics ContextMetrics(const MatF& out, const MatF& ref, int lo, int hi, int shift,
                                      int guard) {
  std::vector<int> ref_rows;
  std::vector<int> out_rows;
  for (int f = 0; f < lo - guard && f < out.rows(); ++f) {
    ref_rows.push_back(f);
    out_rows.push_back(f);
  }
  for (int f = hi + guard; f < ref.rows(); ++f) {
    const int g = f + shift;
    if (g < 0 || g >= out.rows()) continue;
    ref_rows.push_back(f);
    out_rows.push_back(g);
  }
  if (ref_rows.empty()) return {};
  MatF a(static_cast<long>(out_rows.size()), out.cols());
  MatF b(static_cast<long>(ref_rows.size()), ref.cols());
  for (std::size_t i = 0; i < ref_rows.size(); ++i) {
    a.row(static_cast<long>(i)) = out.row(out_rows[i]);
    b.row(static_cast<long>(i)) = ref.row(ref_rows[i]);
  }
  return ComputeSpectralMetrics(a, b);
}

inline void Tally(EvalReport& r, const std::string& condition, const std::string& target,
                  int predicted, int correct, int switched_to, const SpectralMetrics& context) {
  for (OutcomeCounts* o : {&r.conditions[condition], &r.per_target[condition][target]}) {
    ++o->n;
    if (predicted == correct) {
      ++o->accurate;
    } else if (predicted == switched_to) {
      ++o->switched;
    } else {
      ++o->none;
    }
    o->context_l1_sum += context.l1;
    o->convergence_sum += context.spectral_convergence;
  }
}

}  // namespace eval_detail

// `donors` supplies smooth_concat donors (typically the training split). For
// vocoder_only the correct answer is the original phoneme p; for the other
// conditions it is q. With p == q nothing counts as switched.
inline ExperimentResult RunMinimalPairExperiment(
    const std::vector<CorpusItem>& test_items,
    const std::vector<std::pair<std::string, std::string>>& pairs, const GeneratorModel* generator,
    const SiameseParams<float>* siamese, const Centroids& centroids, const VocoderAdapter& vocoder,
    const std::vector<CorpusItem>& donors, const ExperimentConfig& cfg) {
  ExperimentResult result;
  result.report.pairs = pairs;
  if (pairs.empty()) return result;
  Require(generator != nullptr, ErrorCode::kModelMissing, "generator checkpoint required");
  Require(siamese != nullptr, ErrorCode::kModelMissing, "siamese checkpoint required");
  const auto& inv = generator->inventory;
  const int tau = generator->params.cfg.tau;
  const MelConfig mel = generator->mel;
  for (const auto& [p, q] : pairs) {
    for (const auto* s : {&p, &q}) {
      Require(inv.contains(*s), ErrorCode::kInvalidPhoneme, "symbol '" + *s + "'");
      bool found = false;
      for (const auto& item : test_items) {
        const auto& ph = item.segmentation.phonemes;
        found = found || std::find(ph.begin(), ph.end(), *s) != ph.end();
      }
      Require(found, ErrorCode::kPhonemeAbsent, "'" + *s + "' does not occur in the test split");
    }
  }

  auto render = [&](const MatF& frames) {
    if (!cfg.through_vocoder) return frames;
    return ComputeMelSpectrogram(vocoder.Vocode({frames, mel}), mel).frames;
  };
  auto classify = [&](const MatF& frames, int lo, int hi) {
    lo = std::clamp(lo, 0, static_cast<int>(frames.rows()));
    hi = std::clamp(hi, lo, static_cast<int>(frames.rows()));
    Require(hi > lo, ErrorCode::kEmptySegment, "replaced region is empty");
    return PhonemeIdentityScore(frames.middleRows(lo, hi - lo), *siamese, centroids, inv).phoneme;
  };
  auto keep = [&](const std::string& condition, const CorpusItem& item, int k, const std::string& p,
                  const std::string& q, int predicted, Waveform w) {
    if (!cfg.keep_stimuli) return;
    Stimulus s;
    s.id = condition + "_" + std::to_string(result.stimuli.size());
    s.condition = condition;
    s.item_id = item.id;
    s.segment = k;
    s.original_phoneme = p;
    s.target_phoneme = q;
    s.original_transcription = Transcription(item.segmentation, inv);
    s.target_transcription = Transcription(item.segmentation, inv, k, q);
    s.predicted = inv.symbol(predicted);
    s.waveform = std::move(w);
    result.stimuli.push_back(std::move(s));
  };

  std::uint64_t trial = 0;
  for (const auto& [p, q] : pairs) {
    const int ip = inv.index_of(p);
    const int iq = inv.index_of(q);
    const int switched_gen = p == q ? -1 : ip;
    const int switched_voc = p == q ? -1 : iq;
    int used = 0;
    for (const auto& item : test_items) {
      const auto& seg = item.segmentation;
      for (int k = 0; k < seg.size(); ++k) {
        if (seg.phonemes[static_cast<std::size_t>(k)] != p) continue;
        if (cfg.max_occurrences_per_pair > 0 && used >= cfg.max_occurrences_per_pair) break;
        if (seg.total_frames < tau || seg.duration(k) > tau) {
          ++result.report.skipped;
          continue;
        }
        ++used;
        const int lo = seg.begin(k);
        const int hi = seg.end(k);
        const MatF& original = item.mel.frames;

        const MatF voc = render(original);
        const int pv = classify(voc, lo, hi);
        eval_detail::Tally(result.report, kVocoderOnly, q, pv, ip, switched_voc,
                           eval_detail::ContextMetrics(voc, original, lo, hi, 0, cfg.context_guard));
        if (cfg.keep_stimuli) keep(kVocoderOnly, item, k, p, q, pv, vocoder.Vocode({original, mel}));

        const auto corrected = CorrectMel({item.waveform, seg, k, q}, *generator);
        const MatF gen = render(corrected.corrected.frames);
        const int pg = classify(gen, lo, hi);
        eval_detail::Tally(result.report, kGenerated, q, pg, iq, switched_gen,
                           eval_detail::ContextMetrics(gen, original, lo, hi, 0, cfg.context_guard));
        if (cfg.keep_stimuli) keep(kGenerated, item, k, p, q, pg, vocoder.Vocode(corrected.corrected));

        try {
          const auto choice = SelectDonor(donors, {q, item.gender, std::nullopt}, item.speaker_id,
                                          cfg.seed + trial);
          const auto donor = DonorFromItem(donors[choice.item], choice.segment);
          Waveform recipient = item.waveform;
          if (recipient.sample_rate != donor.waveform.sample_rate)
            recipient = Resample(recipient, donor.waveform.sample_rate);
          const auto spliced = SmoothConcat(recipient, seg, k, donor, cfg.concat, mel.hop_size);
          const MatF cat = ComputeMelSpectrogram(spliced.waveform, mel).frames;
          const auto [a, b] = SegmentSamples(seg, k, mel.hop_size, recipient.size());
          const double h = mel.hop_size;
          const int clo = static_cast<int>(std::lround(static_cast<double>(a) / h));
          const int chi = static_cast<int>(std::lround(static_cast<double>(a + donor.length()) / h));
          const int pc = classify(cat, clo, chi);
          eval_detail::Tally(result.report, kSmoothConcat, q, pc, iq, switched_gen,
                             eval_detail::ContextMetrics(cat, original, lo, hi, chi - hi,
                                                         cfg.context_guard));
          if (cfg.keep_stimuli) keep(kSmoothConcat, item, k, p, q, pc, spliced.waveform);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kNoDonor && e.code() != ErrorCode::kFadeOutOfRange) throw;
          ++result.report.no_donor;
        }
        ++trial;
      }
    }
  }
  return result;
}

}  // namespace phonefix
