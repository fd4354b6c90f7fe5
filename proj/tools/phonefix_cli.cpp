// Copyright 2026 The phonefix Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Command-line entry points. Phoneme indices (--k) are 1-based here.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "phonefix/baseline/concat.hpp"
#include "phonefix/corpus/synth.hpp"
#include "phonefix/evaluation/listening.hpp"
#include "phonefix/pipeline/correction.hpp"
#include "phonefix/training/train_generator.hpp"
#include "phonefix/training/train_siamese.hpp"

namespace fs = std::filesystem;
using namespace phonefix;
using nlohmann::json;

namespace {

struct Corpus {
  PhonemeInventory inventory;
  std::vector<CorpusItem> items;
};

Corpus OpenCorpus(const fs::path& root) {
  Corpus c;
  c.inventory = LoadInventory(root / "inventory.json");
  c.items = IngestCorpus(root, c.inventory, MelConfig{});
  return c;
}

fs::path GeneratorDir(const fs::path& ckpt) {
  return fs::exists(ckpt / "generator" / "config.json") ? ckpt / "generator" : ckpt;
}

fs::path SiameseDir(const fs::path& ckpt) {
  return fs::exists(ckpt / "siamese" / "config.json") ? ckpt / "siamese" : ckpt;
}

json ReadJson(const fs::path& p) { return json::parse(ReadTextFile(p)); }

std::vector<int> TargetIndices(const json& cfg, const PhonemeInventory& inv) {
  std::vector<int> out;
  if (cfg.contains("targets")) {
    for (const auto& s : cfg["targets"]) out.push_back(inv.index_of(s.get<std::string>()));
  } else {
    for (int i = 0; i < inv.size(); ++i)
      if (i != inv.silence_index()) out.push_back(i);
  }
  return out;
}

CorpusSplit MakeSplit(const json& cfg, const std::vector<CorpusItem>& items) {
  std::set<std::string> test;
  if (cfg.contains("test_ids"))
    for (const auto& s : cfg["test_ids"]) test.insert(s.get<std::string>());
  return SplitCorpus(items, cfg.value("split_seed", std::uint64_t{1}), test);
}

json SplitToJson(const CorpusSplit& s) {
  return {{"train", s.train}, {"validation", s.validation}, {"test", s.test}};
}

PhonemeSegmentation ReadAlignment(const fs::path& p, int sample_rate, int hop,
                                  const std::string& silence) {
  const std::string text = ReadTextFile(p);
  if (p.extension() == ".TextGrid") return ParseTextGridPhones(text, sample_rate, hop, silence);
  return ParseAlignmentCsv(text);
}

void CheckK(int k, const PhonemeSegmentation& seg) {
  Require(k >= 1 && k <= seg.size(), ErrorCode::kInvalidPhoneme,
          "--k " + std::to_string(k) + " not in [1, " + std::to_string(seg.size()) + "]");
}

int CmdCorpusValidate(const fs::path& root) {
  const auto c = OpenCorpus(root);
  std::map<std::string, int> counts;
  for (const auto& item : c.items)
    for (const auto& p : item.segmentation.phonemes) ++counts[p];
  json out = {{"items", c.items.size()}, {"phoneme_counts", counts}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int CmdCorpusSynth(std::uint64_t seed, int n, int speakers, const fs::path& out) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_items = n;
  cfg.n_speakers = speakers;
  const auto inv = DefaultSynthInventory();
  WriteCorpus(SynthCorpus(cfg, inv), inv, out);
  std::cout << "wrote " << n << " items to " << out << "\n";
  return 0;
}

int CmdTrain(const std::string& what, const fs::path& root, const fs::path& config_path,
             const fs::path& out, const fs::path& siamese_path) {
  const auto c = OpenCorpus(root);
  const json cfg = config_path.empty() ? json::object() : ReadJson(config_path);
  const auto split = MakeSplit(cfg, c.items);
  TrainConfig tc = TrainConfigFromJson(cfg.value("train", json::object()));
  if (tc.log_path.empty()) tc.log_path = (out / "train_log.jsonl").string();
  fs::create_directories(out);
  WriteTextFile(out / "split.json", SplitToJson(split).dump(2) + "\n");
  TrainReport report;
  if (what == "siamese") {
    const auto arch = SiameseConfigFromJson(cfg.value("siamese", json::object()));
    auto [params, r] = TrainSiamese(c.items, split, c.inventory, arch, tc);
    SiameseModel model{std::move(params), c.inventory, MelConfig{}};
    SaveSiamese(out, model);
    report = std::move(r);
  } else {
    const auto arch = GeneratorConfigFromJson(cfg.value("generator", json::object()));
    std::optional<SiameseModel> siamese;
    if (!siamese_path.empty()) siamese = LoadSiamese(SiameseDir(siamese_path));
    auto [params, r] = TrainGenerator(c.items, split, c.inventory,
                                      siamese ? &siamese->params : nullptr, arch, tc,
                                      TargetIndices(cfg, c.inventory));
    GeneratorModel model{std::move(params), c.inventory, MelConfig{}};
    SaveGenerator(out, model);
    report = std::move(r);
  }
  report.checkpoint_path = out.string();
  WriteTextFile(out / "report.json", report.ToJson().dump(2) + "\n");
  std::cout << "best validation loss " << report.best_validation_loss << " at epoch "
            << report.best_epoch << "; checkpoint " << out << "\n";
  return 0;
}

VocoderAdapter MakeVocoder(const std::string& kind, const std::string& command, int iters) {
  if (kind == "griffin_lim") return VocoderAdapter::GriffinLimVocoder(iters);
  if (kind == "external") {
    Require(!command.empty(), ErrorCode::kInvalidConfig, "--vocoder external needs --vocoder-cmd");
    return VocoderAdapter::External(command);
  }
  Fail(ErrorCode::kInvalidConfig, "unknown vocoder '" + kind + "'");
}

int CmdCorrect(const fs::path& in, const fs::path& align, int k, const std::string& target,
               const fs::path& ckpt, const VocoderAdapter& vocoder, const fs::path& out) {
  const auto model = LoadGenerator(GeneratorDir(ckpt));
  CorrectionRequest req{LoadWav(in),
                        ReadAlignment(align, model.mel.sample_rate, model.mel.hop_size,
                                      model.inventory.silence_symbol()),
                        k - 1, target};
  CheckK(k, req.segmentation);
  const auto r = CorrectUtterance(req, model, vocoder);
  WriteWav(out, r.waveform);
  std::cout << "replaced frames [" << r.window.utterance_start + r.window.mask_lo << ", "
            << r.window.utterance_start + r.window.mask_hi << ") with '" << target << "'; wrote "
            << out << "\n";
  return 0;
}

int CmdBaseline(const fs::path& in, const fs::path& align, int k, const std::string& target,
                const fs::path& root, std::uint64_t seed, const std::string& gender,
                const std::string& speaker, const std::string& word, const fs::path& out) {
  const auto c = OpenCorpus(root);
  const MelConfig mel;
  const Waveform recipient = Resample(LoadWav(in), mel.sample_rate);
  const auto seg = ReadAlignment(align, mel.sample_rate, mel.hop_size, c.inventory.silence_symbol());
  CheckK(k, seg);
  DonorQuery q{target, ParseGender(gender), std::nullopt};
  if (!word.empty()) q.preferred_word = word;
  const auto choice = SelectDonor(c.items, q, speaker, seed);
  const auto donor = DonorFromItem(c.items[choice.item], choice.segment);
  const auto r = SmoothConcat(recipient, seg, k - 1, donor, ConcatParams{}, mel.hop_size);
  WriteWav(out, r.waveform);
  std::cout << "donor " << choice.item_id << " segment " << choice.segment + 1 << ", shift "
            << r.offset << " samples; wrote " << out << "\n";
  return 0;
}

int CmdEvaluate(const fs::path& root, const fs::path& ckpt, const std::string& pair_spec,
                const fs::path& split_path, std::uint64_t seed, int gl_iters, int max_per_pair,
                bool listening, const fs::path& out) {
  const auto c = OpenCorpus(root);
  const auto gen = LoadGenerator(GeneratorDir(ckpt));
  const auto siamese = LoadSiamese(SiameseDir(ckpt));
  const fs::path sp = split_path.empty() ? GeneratorDir(ckpt) / "split.json" : split_path;
  const json split = ReadJson(sp);
  auto ids = split.at("test").get<std::vector<std::string>>();
  if (ids.empty()) ids = split.at("validation").get<std::vector<std::string>>();
  const auto test = SelectItems(c.items, ids);
  const auto train = SelectItems(c.items, split.at("train").get<std::vector<std::string>>());
  std::vector<std::pair<std::string, std::string>> pairs;
  std::stringstream ss(pair_spec);
  for (std::string tok; std::getline(ss, tok, ',');) {
    const auto colon = tok.find(':');
    Require(colon != std::string::npos, ErrorCode::kInvalidArgument, "pair '" + tok + "' is not p:q");
    pairs.emplace_back(tok.substr(0, colon), tok.substr(colon + 1));
  }
  const auto centroids = ComputeCentroids(siamese.params, train, c.inventory);
  ExperimentConfig cfg;
  cfg.seed = seed;
  cfg.max_occurrences_per_pair = max_per_pair;
  cfg.keep_stimuli = listening;
  const auto result = RunMinimalPairExperiment(test, pairs, &gen, &siamese.params, centroids,
                                               VocoderAdapter::GriffinLimVocoder(gl_iters), train, cfg);
  fs::create_directories(out);
  WriteTextFile(out / "report.json", result.report.ToJson().dump(2) + "\n");
  WriteTextFile(out / "report.md", result.report.ToMarkdown());
  if (listening) ExportListeningManifest(result.stimuli, out / "listening", seed);
  std::cout << result.report.ToMarkdown();
  return 0;
}

int CmdExportFinetune(const fs::path& root, const fs::path& ckpt, const std::string& targets,
                      const fs::path& out) {
  const auto c = OpenCorpus(root);
  const auto gen = LoadGenerator(GeneratorDir(ckpt));
  std::vector<std::string> t;
  std::stringstream ss(targets);
  for (std::string tok; std::getline(ss, tok, ',');) t.push_back(tok);
  const auto m = ExportVocoderFinetuneSet(c.items, gen, t, out);
  std::cout << "exported " << m["items"].size() << " pairs to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phonefix: mispronounced-phoneme correction by spectrogram inpainting"};
  app.require_subcommand(1);

  auto* corpus = app.add_subcommand("corpus", "Corpus tools");
  corpus->require_subcommand(1);
  fs::path validate_root;
  auto* validate = corpus->add_subcommand("validate", "Load and check a corpus");
  validate->add_option("root", validate_root)->required();
  std::uint64_t synth_seed = 1;
  int synth_n = 200;
  int synth_speakers = 10;
  fs::path synth_out;
  auto* synth = corpus->add_subcommand("synth", "Write a synthetic pseudo-phoneme corpus");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--n", synth_n);
  synth->add_option("--speakers", synth_speakers);
  synth->add_option("--out", synth_out)->required();

  std::string train_what;
  fs::path train_corpus, train_config, train_out, train_siamese;
  auto* train = app.add_subcommand("train", "Train the siamese embedder or the generator");
  train->add_option("model", train_what)->required()->check(CLI::IsMember({"siamese", "generator"}));
  train->add_option("--corpus", train_corpus)->required();
  train->add_option("--config", train_config);
  train->add_option("--out", train_out)->required();
  train->add_option("--siamese", train_siamese, "Siamese checkpoint for the embedding loss terms");

  fs::path in, align, ckpt, out;
  int k = 0;
  std::string target, vocoder_kind = "griffin_lim", vocoder_cmd;
  int gl_iters = kDefaultGriffinLimIters;
  auto* correct = app.add_subcommand("correct", "Replace phoneme k with the target phoneme");
  correct->add_option("--in", in)->required();
  correct->add_option("--align", align)->required();
  correct->add_option("--k", k, "1-based phoneme index")->required();
  correct->add_option("--target", target)->required();
  correct->add_option("--ckpt", ckpt)->required();
  correct->add_option("--vocoder", vocoder_kind)->check(CLI::IsMember({"griffin_lim", "external"}));
  correct->add_option("--vocoder-cmd", vocoder_cmd, "Command with {mel} and {out} placeholders");
  correct->add_option("--gl-iters", gl_iters);
  correct->add_option("--out", out)->required();

  fs::path bl_corpus;
  std::uint64_t seed = 1;
  std::string gender = "unknown", speaker, word;
  auto* baseline = app.add_subcommand("baseline-concat", "Splice in a donor speaker's phoneme");
  baseline->add_option("--in", in)->required();
  baseline->add_option("--align", align)->required();
  baseline->add_option("--k", k, "1-based phoneme index")->required();
  baseline->add_option("--target", target)->required();
  baseline->add_option("--corpus", bl_corpus)->required();
  baseline->add_option("--seed", seed);
  baseline->add_option("--gender", gender)->check(CLI::IsMember({"male", "female", "unknown"}));
  baseline->add_option("--speaker", speaker, "Speaker to exclude from donors");
  baseline->add_option("--word", word, "Preferred donor word");
  baseline->add_option("--out", out)->required();

  fs::path ev_corpus, split_path;
  std::string pairs = "A:B";
  int max_per_pair = 0;
  bool listening = false;
  auto* evaluate = app.add_subcommand("evaluate", "Minimal-pair experiment with the oracle");
  evaluate->add_option("--corpus", ev_corpus)->required();
  evaluate->add_option("--ckpt", ckpt, "Directory holding generator/ and siamese/")->required();
  evaluate->add_option("--pairs", pairs, "Comma-separated p:q pairs");
  evaluate->add_option("--split", split_path);
  evaluate->add_option("--seed", seed);
  evaluate->add_option("--gl-iters", gl_iters);
  evaluate->add_option("--max-per-pair", max_per_pair);
  evaluate->add_flag("--listening", listening, "Also export listening-test stimuli");
  evaluate->add_option("--out", out)->required();

  fs::path ex_corpus;
  std::string ex_targets;
  auto* exportft = app.add_subcommand("export-finetune", "Export vocoder fine-tuning pairs");
  exportft->add_option("--corpus", ex_corpus)->required();
  exportft->add_option("--ckpt", ckpt)->required();
  exportft->add_option("--targets", ex_targets, "Comma-separated phonemes")->required();
  exportft->add_option("--out", out)->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (validate->parsed()) return CmdCorpusValidate(validate_root);
    if (synth->parsed()) return CmdCorpusSynth(synth_seed, synth_n, synth_speakers, synth_out);
    if (train->parsed()) return CmdTrain(train_what, train_corpus, train_config, train_out, train_siamese);
    if (correct->parsed())
      return CmdCorrect(in, align, k, target, ckpt, MakeVocoder(vocoder_kind, vocoder_cmd, gl_iters), out);
    if (baseline->parsed())
      return CmdBaseline(in, align, k, target, bl_corpus, seed, gender, speaker, word, out);
    if (evaluate->parsed())
      return CmdEvaluate(ev_corpus, ckpt, pairs, split_path, seed, gl_iters, max_per_pair, listening, out);
    if (exportft->parsed()) return CmdExportFinetune(ex_corpus, ckpt, ex_targets, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
