#include "cpfd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "cpfd/adam.hpp"
#include "cpfd/balance.hpp"
#include "cpfd/checkpoint.hpp"
#include "cpfd/distill.hpp"

namespace cpfd {

namespace {

std::vector<int> encode_tokens(const Sentence& s, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(s.tokens.size());
  for (const std::string& token : s.tokens) {
    ids.push_back(vocab.encode(token));
  }
  return ids;
}

std::vector<Sentence> truncate_sentences(std::vector<Sentence> sentences, int max_len) {
  for (Sentence& s : sentences) {
    if (static_cast<int>(s.tokens.size()) > max_len) {
      s.tokens.resize(max_len);
      s.labels.resize(max_len);
    }
  }
  return sentences;
}

}  // namespace

std::vector<std::vector<std::string>> predict_labels(const TaggerModel& model,
                                                     const std::vector<Sentence>& sentences,
                                                     const Vocabulary& vocab,
                                                     const LabelSchema& schema) {
  std::vector<std::vector<std::string>> out;
  out.reserve(sentences.size());
  for (const Sentence& s : sentences) {
    const ForwardResult result = model.forward(encode_tokens(s, vocab));
    const int n = result.logits.shape()[0];
    const int classes = result.logits.shape()[1];
    std::vector<std::string> labels(n);
    for (int i = 0; i < n; ++i) {
      const double* row = result.logits.value().data() + static_cast<std::size_t>(i) * classes;
      int best = 0;
      for (int c = 1; c < classes; ++c) {
        if (row[c] > row[best]) best = c;
      }
      labels[i] = schema.class_name(best);
    }
    out.push_back(std::move(labels));
  }
  return out;
}

TrainStepResult train_step(const TaggerModel& model, const TaggerModel* old_model,
                           const std::vector<Sentence>& train,
                           const std::vector<Sentence>& dev,
                           const Vocabulary& vocab, const LabelSchema& schema,
                           int step, const RunConfig& cfg, Rng& rng,
                           const std::string& pseudo_dump_path, std::ostream* log) {
  if ((step == 1) != (old_model == nullptr)) {
    throw std::invalid_argument("train_step: old model must be present exactly for steps > 1");
  }
  if (old_model != nullptr && !old_model->frozen()) {
    throw std::invalid_argument("train_step: old model must be frozen");
  }

  const PseudoMode mode = step == 1 ? PseudoMode::None : cfg.pseudo;
  const PseudoPrepass prepass = build_pseudo_targets(mode, train, old_model, vocab, schema);
  if (!pseudo_dump_path.empty() && step > 1) {
    dump_pseudo_targets(pseudo_dump_path, train, prepass, schema);
  }

  // Dataset-scope re-weighting uses one plan for the whole step.
  std::optional<ReweightPlan> dataset_plan;
  if (cfg.art && cfg.art_scope == ArtScope::Dataset) {
    std::vector<int> all_targets;
    for (const auto& row : prepass.targets) {
      all_targets.insert(all_targets.end(), row.begin(), row.end());
    }
    dataset_plan = compute_weights(all_targets, schema, step);
  }

  TaggerModel current = model.trainable_copy();
  AdamOptimizer optimizer(current.parameters(), cfg.learning_rate);

  TrainStepResult result;
  double best_micro = -1.0;

  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  const std::vector<std::string>& dev_types = schema.types_at_step(step);
  const int epochs = cfg.effective_epochs();

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t batch_start = 0; batch_start < order.size();
         batch_start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t batch_end =
          std::min(order.size(), batch_start + static_cast<std::size_t>(cfg.batch_size));
      const int batch_count = static_cast<int>(batch_end - batch_start);

      // Pad to the batch max length; padded keys are masked inside forward.
      int max_len = 0;
      for (std::size_t b = batch_start; b < batch_end; ++b) {
        max_len = std::max(max_len, static_cast<int>(train[order[b]].tokens.size()));
      }

      std::optional<ReweightPlan> batch_plan;
      if (cfg.art && cfg.art_scope == ArtScope::Batch) {
        std::vector<int> batch_targets;
        for (std::size_t b = batch_start; b < batch_end; ++b) {
          const auto& row = prepass.targets[order[b]];
          batch_targets.insert(batch_targets.end(), row.begin(), row.end());
        }
        batch_plan = compute_weights(batch_targets, schema, step);
      }
      const std::optional<ReweightPlan>& plan = cfg.art_scope == ArtScope::Batch
                                                    ? batch_plan
                                                    : dataset_plan;

      optimizer.zero_grad();
      Tensor batch_loss;
      for (std::size_t b = batch_start; b < batch_end; ++b) {
        const int idx = order[b];
        const Sentence& sentence = train[idx];
        const int real_len = static_cast<int>(sentence.tokens.size());
        std::vector<int> ids = encode_tokens(sentence, vocab);
        ids.resize(max_len, Vocabulary::kPadId);

        const ForwardResult fwd = current.forward(ids, real_len);

        const std::vector<int>& targets = prepass.targets[idx];
        std::vector<double> eta(targets.size(), 1.0);
        if (plan.has_value()) {
          for (std::size_t i = 0; i < targets.size(); ++i) {
            eta[i] = token_weight(*plan, targets[i], schema, step);
          }
        }
        Tensor seq_loss = balanced_pseudo_ce(fwd.logits, targets, eta);

        if (old_model != nullptr) {
          const ForwardResult old_fwd = old_model->forward(ids, real_len);
          Tensor distill;
          if (cfg.distill.variant != DistillVariant::None && cfg.distill.lambda != 0.0) {
            distill = distill_loss(cfg.distill.variant, fwd.attention, old_fwd.attention);
          }
          Tensor kl;
          if (cfg.distill.kl_weight != 0.0) {
            kl = kl_logit_loss(fwd.logits, old_fwd.logits, cfg.distill.kl_temperature);
          }
          seq_loss = total_loss(seq_loss, distill, kl, cfg.distill);
        }
        batch_loss = batch_loss.defined() ? add(batch_loss, seq_loss) : seq_loss;
      }
      batch_loss = scale(batch_loss, 1.0 / batch_count);

      if (!std::isfinite(batch_loss.item())) {
        throw std::runtime_error("train_step: non-finite loss at step " +
                                 std::to_string(step) + ", epoch " + std::to_string(epoch) +
                                 ", batch starting at sentence " +
                                 std::to_string(batch_start));
      }
      backward(batch_loss);
      optimizer.step();
    }

    const auto dev_pred = predict_labels(current, dev, vocab, schema);
    std::vector<std::vector<std::string>> dev_gold;
    dev_gold.reserve(dev.size());
    for (const Sentence& s : dev) dev_gold.push_back(s.labels);
    const double micro = dev.empty() ? 0.0 : f1_scores(dev_pred, dev_gold, dev_types).micro_f1;

    if (micro > best_micro) {
      best_micro = micro;
      result.model = current.trainable_copy();
      result.best_epoch = epoch;
    }
    if (log != nullptr) {
      char buffer[128];
      std::snprintf(buffer, sizeof(buffer), "  step %d epoch %2d dev mi-f1 %.4f%s",
                    step, epoch, micro, result.best_epoch == epoch ? " *" : "");
      (*log) << buffer << "\n";
    }
  }

  result.best_dev_micro_f1 = best_micro < 0.0 ? 0.0 : best_micro;
  return result;
}

namespace {

nlohmann::json metrics_record(const StepReport& report) {
  nlohmann::json per_type;
  for (const auto& [type, prf] : report.test.per_type) {
    per_type[type] = {{"p", prf.precision}, {"r", prf.recall}, {"f1", prf.f1},
                      {"tp", prf.tp},       {"fp", prf.fp},    {"fn", prf.fn}};
  }
  return nlohmann::json{{"step", report.step},
                        {"mi_f1", report.test.micro_f1},
                        {"ma_f1", report.test.macro_f1},
                        {"mi_p", report.test.micro_precision},
                        {"mi_r", report.test.micro_recall},
                        {"dev_mi_f1", report.dev_micro_f1},
                        {"best_epoch", report.best_epoch},
                        {"per_type", per_type}};
}

std::string format_f1(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.6f", v);
  return buffer;
}

struct ExperimentData {
  std::vector<Sentence> train, dev, test;
};

ExperimentData load_experiment_data(const RunConfig& cfg) {
  ExperimentData data;
  if (!cfg.uses_synthetic()) {
    data.train = read_conll(cfg.train_path);
    data.dev = read_conll(cfg.dev_path);
    data.test = read_conll(cfg.test_path);
    return data;
  }
  // Disjoint splits from one generator family: the dev/test quotas scale with
  // the training quota and draw from shifted seeds.
  SyntheticConfig synth = cfg.synthetic;
  data.train = generate_synthetic(synth);
  synth.seed = cfg.synthetic.seed + 1;
  synth.sentences_per_type = std::max(4, cfg.synthetic.sentences_per_type / 5);
  data.dev = generate_synthetic(synth);
  synth.seed = cfg.synthetic.seed + 2;
  synth.sentences_per_type = std::max(6, cfg.synthetic.sentences_per_type / 3);
  data.test = generate_synthetic(synth);
  return data;
}

}  // namespace

RunReport run_experiment(const RunConfig& cfg, std::ostream* log) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  ExperimentData data = load_experiment_data(cfg);

  std::vector<Sentence> all;
  all.insert(all.end(), data.train.begin(), data.train.end());
  all.insert(all.end(), data.dev.begin(), data.dev.end());
  all.insert(all.end(), data.test.begin(), data.test.end());
  const std::vector<std::string> types = collect_entity_types(all);
  if (types.empty()) {
    throw std::runtime_error("run_experiment: corpus contains no entity types");
  }

  const StepSchedule schedule = build_schedule(types, cfg.fg, cfg.pg);
  const LabelSchema schema = LabelSchema::build(schedule.steps);

  ModelConfig model_cfg = cfg.model;
  data.train = truncate_sentences(std::move(data.train), model_cfg.max_seq_len);
  data.dev = truncate_sentences(std::move(data.dev), model_cfg.max_seq_len);
  data.test = truncate_sentences(std::move(data.test), model_cfg.max_seq_len);

  const std::vector<StepDataset> slices = slice_and_mask(data.train, schedule);

  // Vocabulary over the union of the training slices; dev/test tokens outside
  // it map to <UNK>.
  Vocabulary vocab = build_vocabulary(data.train);
  model_cfg.vocab_size = vocab.size();
  model_cfg.validate();

  Rng rng(cfg.seed);
  TaggerModel model(model_cfg, schema.class_count_at(1), rng);
  TaggerModel teacher;  // assigned from step 2 on
  bool has_teacher = false;

  RunReport report;
  report.out_dir = cfg.out_dir;

  std::ofstream metrics_out(cfg.out_dir + "/metrics.jsonl");
  if (!metrics_out) {
    throw std::runtime_error("run_experiment: cannot write to " + cfg.out_dir);
  }

  for (int t = 1; t <= schedule.step_count(); ++t) {
    if (t > 1) {
      teacher = model.frozen_snapshot();
      has_teacher = true;
      model.expand_classifier(2 * static_cast<int>(schedule.steps[t - 1].size()), rng);
    }

    const std::vector<Sentence> dev_view = mask_to_types(data.dev, schema.types_at_step(t));
    const std::string dump_path =
        cfg.dump_pseudo && t > 1
            ? cfg.out_dir + "/pseudo_step" + std::to_string(t) + ".conll"
            : "";
    if (log != nullptr) {
      (*log) << "step " << t << "/" << schedule.step_count() << " ("
             << slices[t - 1].sentences.size() << " train sentences)\n";
    }
    TrainStepResult trained =
        train_step(model, has_teacher ? &teacher : nullptr, slices[t - 1].sentences,
                   dev_view, vocab, schema, t, cfg, rng, dump_path, log);
    model = std::move(trained.model);

    // Test view keeps all types seen so far.
    const std::vector<std::string> seen = schema.types_up_to(t);
    const std::vector<Sentence> test_view = mask_to_types(data.test, seen);
    const auto test_pred = predict_labels(model, test_view, vocab, schema);
    std::vector<std::vector<std::string>> test_gold;
    test_gold.reserve(test_view.size());
    for (const Sentence& s : test_view) test_gold.push_back(s.labels);

    StepReport step_report;
    step_report.step = t;
    step_report.test = f1_scores(test_pred, test_gold, seen);
    step_report.test.step = t;
    step_report.dev_micro_f1 = trained.best_dev_micro_f1;
    step_report.best_epoch = trained.best_epoch;
    report.steps.push_back(step_report);

    metrics_out << metrics_record(step_report).dump() << "\n";
    save_checkpoint(cfg.out_dir + "/ckpt_step" + std::to_string(t) + ".bin", model,
                    [&] {
                      std::vector<std::string> names;
                      for (int c = 0; c < schema.class_count_at(t); ++c) {
                        names.push_back(schema.class_name(c));
                      }
                      return names;
                    }(),
                    t);
    if (log != nullptr) {
      (*log) << "step " << t << " test mi-f1 " << format_f1(step_report.test.micro_f1)
             << " ma-f1 " << format_f1(step_report.test.macro_f1) << "\n";
    }
  }
  metrics_out.close();

  std::vector<StepMetrics> series;
  series.reserve(report.steps.size());
  for (const StepReport& s : report.steps) series.push_back(s.test);
  const RunSummary summary = aggregate_run(series);
  report.mean_micro_f1 = summary.mean_micro_f1;
  report.mean_macro_f1 = summary.mean_macro_f1;

  std::ofstream csv(cfg.out_dir + "/summary.csv");
  csv << "step,mi_f1,ma_f1\n";
  for (const StepReport& s : report.steps) {
    csv << s.step << "," << format_f1(s.test.micro_f1) << "," << format_f1(s.test.macro_f1)
        << "\n";
  }
  csv << "avg," << format_f1(report.mean_micro_f1) << "," << format_f1(report.mean_macro_f1)
      << "\n";
  csv.close();

  std::ofstream resolved(cfg.out_dir + "/config_resolved.txt");
  resolved << resolved_config_text(cfg);
  resolved.close();

  return report;
}

}  // namespace cpfd
