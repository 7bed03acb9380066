#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cpfd/config.hpp"
#include "cpfd/corpus.hpp"
#include "cpfd/eval.hpp"
#include "cpfd/trainer.hpp"

namespace {

namespace fs = std::filesystem;

int cmd_run(const std::string& config_path, std::uint64_t seed_override, bool has_seed,
            const std::string& out_override, bool dump_pseudo) {
  cpfd::RunConfig cfg = cpfd::parse_config_file(config_path);
  if (has_seed) cfg.seed = seed_override;
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (dump_pseudo) cfg.dump_pseudo = true;

  const cpfd::RunReport report = cpfd::run_experiment(cfg, &std::cout);
  std::cout << "mean over steps: mi-f1 " << report.mean_micro_f1 << " ma-f1 "
            << report.mean_macro_f1 << "\n";
  std::cout << "artifacts in " << report.out_dir << "\n";
  return 0;
}

int cmd_synth(int types, int per_type, std::uint64_t seed, int vocab,
              const std::string& out_dir) {
  fs::create_directories(out_dir);
  cpfd::SyntheticConfig cfg;
  cfg.types = types;
  cfg.vocab_size = vocab;
  cfg.seed = seed;

  cfg.sentences_per_type = per_type;
  cpfd::write_conll(out_dir + "/train.conll", cpfd::generate_synthetic(cfg));
  cfg.seed = seed + 1;
  cfg.sentences_per_type = std::max(4, per_type / 5);
  cpfd::write_conll(out_dir + "/dev.conll", cpfd::generate_synthetic(cfg));
  cfg.seed = seed + 2;
  cfg.sentences_per_type = std::max(6, per_type / 3);
  cpfd::write_conll(out_dir + "/test.conll", cpfd::generate_synthetic(cfg));

  std::cout << "wrote train/dev/test CoNLL files to " << out_dir << "\n";
  return 0;
}

int cmd_slice(const std::string& data_path, int fg, int pg, const std::string& out_dir) {
  const auto sentences = cpfd::read_conll(data_path);
  const auto types = cpfd::collect_entity_types(sentences);
  const auto schedule = cpfd::build_schedule(types, fg, pg);
  const auto slices = cpfd::slice_and_mask(sentences, schedule);

  fs::create_directories(out_dir);
  for (const auto& slice : slices) {
    const std::string path = out_dir + "/step" + std::to_string(slice.step) + ".conll";
    cpfd::write_conll(path, slice.sentences);
    std::cout << "step " << slice.step << ": " << slice.sentences.size()
              << " sentences (types";
    for (const auto& t : schedule.steps[slice.step - 1]) std::cout << " " << t;
    std::cout << ") -> " << path << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gold_path) {
  const auto pred = cpfd::read_conll(pred_path);
  const auto gold = cpfd::read_conll(gold_path);
  if (pred.size() != gold.size()) {
    std::cerr << "eval: " << pred.size() << " predicted sentences vs " << gold.size()
              << " gold sentences\n";
    return 1;
  }
  const auto types = cpfd::collect_entity_types(gold);
  std::vector<std::vector<std::string>> pred_labels, gold_labels;
  for (const auto& s : pred) pred_labels.push_back(s.labels);
  for (const auto& s : gold) gold_labels.push_back(s.labels);

  const cpfd::StepMetrics metrics = cpfd::f1_scores(pred_labels, gold_labels, types);
  std::cout << "micro: P " << metrics.micro_precision << " R " << metrics.micro_recall
            << " F1 " << metrics.micro_f1 << "\n";
  std::cout << "macro: F1 " << metrics.macro_f1 << "\n";
  for (const auto& [type, prf] : metrics.per_type) {
    std::cout << "  " << type << ": P " << prf.precision << " R " << prf.recall << " F1 "
              << prf.f1 << " (tp " << prf.tp << " fp " << prf.fp << " fn " << prf.fn
              << ")\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continual NER trainer with pooled attention distillation and "
               "confidence-based pseudo-labeling"};
  app.require_subcommand(1);

  std::string config_path, out_override, data_path, pred_path, gold_path, out_dir;
  std::uint64_t seed = 1;
  int types = 4, per_type = 60, vocab = 40, fg = 1, pg = 1;

  auto* run = app.add_subcommand("run", "run a full continual experiment from a config file");
  run->add_option("--config", config_path, "config file path")->required();
  auto* seed_opt = run->add_option("--seed", seed, "override the config seed");
  run->add_option("--out", out_override, "override the output directory");

  auto* synth = app.add_subcommand("synth", "generate a synthetic CoNLL corpus");
  synth->add_option("--types", types, "entity type count")->required();
  synth->add_option("--per-type", per_type, "training sentences per type")->required();
  synth->add_option("--seed", seed, "generator seed")->required();
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--vocab", vocab, "filler vocabulary size");

  auto* slice = app.add_subcommand("slice", "slice a CoNLL file into masked continual steps");
  slice->add_option("--data", data_path, "CoNLL input file")->required();
  slice->add_option("--fg", fg, "types in the base step")->required();
  slice->add_option("--pg", pg, "types per later step")->required();
  slice->add_option("--out", out_dir, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "entity-level F1 between two CoNLL files");
  eval->add_option("--pred", pred_path, "predictions in CoNLL format")->required();
  eval->add_option("--gold", gold_path, "references in CoNLL format")->required();

  auto* dump = app.add_subcommand(
      "dump-pseudo", "run an experiment and dump per-step pseudo-label decisions");
  dump->add_option("--config", config_path, "config file path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (run->parsed()) {
      return cmd_run(config_path, seed, seed_opt->count() > 0, out_override, false);
    }
    if (synth->parsed()) {
      return cmd_synth(types, per_type, seed, vocab, out_dir);
    }
    if (slice->parsed()) {
      return cmd_slice(data_path, fg, pg, out_dir);
    }
    if (eval->parsed()) {
      return cmd_eval(pred_path, gold_path);
    }
    if (dump->parsed()) {
      return cmd_run(config_path, 0, false, "", true);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
