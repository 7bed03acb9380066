#pragma once

#include <cstdint>
#include <string>

#include "cpfd/corpus.hpp"
#include "cpfd/distill.hpp"
#include "cpfd/model.hpp"
#include "cpfd/pseudo.hpp"

namespace cpfd {

enum class ArtScope { Batch, Dataset };

// One experiment. Parsed from a flat key=value file; every knob of the method
// (distillation variant, pseudo-labeling mode, re-weighting) is reachable
// here so ablations are plain config edits.
struct RunConfig {
  // Data: either all three CoNLL paths, or the synthetic generator.
  std::string train_path;
  std::string dev_path;
  std::string test_path;
  SyntheticConfig synthetic;

  int fg = 1;
  int pg = 1;

  ModelConfig model;  // vocab_size is filled from the data by the runner

  int epochs = 0;  // 0 = auto: 10 when pg == 1, else 20
  int batch_size = 8;
  double learning_rate = 4e-4;

  DistillConfig distill;
  PseudoMode pseudo = PseudoMode::CPL;
  bool art = true;
  ArtScope art_scope = ArtScope::Batch;

  std::uint64_t seed = 1;
  std::string out_dir = "runs/out";
  bool dump_pseudo = false;

  bool uses_synthetic() const { return train_path.empty(); }
  int effective_epochs() const { return epochs > 0 ? epochs : (pg == 1 ? 10 : 20); }
  void validate() const;
};

// "key = value" lines, '#' comments, unknown keys rejected.
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
RunConfig parse_config_file(const std::string& path);

// Canonical echo of every setting, suitable for re-parsing.
std::string resolved_config_text(const RunConfig& cfg);

}  // namespace cpfd
