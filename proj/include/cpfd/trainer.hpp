#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cpfd/config.hpp"
#include "cpfd/corpus.hpp"
#include "cpfd/eval.hpp"
#include "cpfd/model.hpp"
#include "cpfd/pseudo.hpp"
#include "cpfd/schema.hpp"

namespace cpfd {

// Greedy per-token decoding into schema label strings.
std::vector<std::vector<std::string>> predict_labels(const TaggerModel& model,
                                                     const std::vector<Sentence>& sentences,
                                                     const Vocabulary& vocab,
                                                     const LabelSchema& schema);

struct TrainStepResult {
  TaggerModel model;  // trainable copy of the best-validation parameters
  double best_dev_micro_f1 = 0.0;
  int best_epoch = 0;
};

// One continual step: pseudo-label pre-pass, epochs of batched Adam updates
// on the combined loss, epoch-level validation, best-model selection (ties
// keep the earlier epoch). old_model must be null exactly at step 1.
TrainStepResult train_step(const TaggerModel& model, const TaggerModel* old_model,
                           const std::vector<Sentence>& train,
                           const std::vector<Sentence>& dev,
                           const Vocabulary& vocab, const LabelSchema& schema,
                           int step, const RunConfig& cfg, Rng& rng,
                           const std::string& pseudo_dump_path = "",
                           std::ostream* log = nullptr);

struct StepReport {
  int step = 0;
  StepMetrics test;
  double dev_micro_f1 = 0.0;
  int best_epoch = 0;
};

struct RunReport {
  std::vector<StepReport> steps;
  double mean_micro_f1 = 0.0;
  double mean_macro_f1 = 0.0;
  std::string out_dir;
};

// Full experiment: data setup, steps 1..T with the previous best model frozen
// as the teacher, per-step test evaluation, and artifacts (metrics.jsonl,
// summary.csv, checkpoints, resolved config) in cfg.out_dir.
RunReport run_experiment(const RunConfig& cfg, std::ostream* log = nullptr);

}  // namespace cpfd
