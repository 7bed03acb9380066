#include "cpfd/pseudo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cpfd {

PseudoMode pseudo_mode_from_string(const std::string& name) {
  if (name == "none") return PseudoMode::None;
  if (name == "VPL" || name == "vpl") return PseudoMode::VPL;
  if (name == "CPL" || name == "cpl") return PseudoMode::CPL;
  throw std::invalid_argument("unknown pseudo-label mode '" + name + "'");
}

std::string to_string(PseudoMode mode) {
  switch (mode) {
    case PseudoMode::None: return "none";
    case PseudoMode::VPL: return "VPL";
    case PseudoMode::CPL: return "CPL";
  }
  return "none";
}

double token_entropy(const std::vector<double>& probs) {
  if (probs.empty()) {
    throw std::invalid_argument("token_entropy: empty distribution");
  }
  double mass = 0.0;
  for (double p : probs) {
    if (p < 0.0) {
      throw std::invalid_argument("token_entropy: negative probability");
    }
    mass += p;
  }
  if (std::abs(mass - 1.0) > 1e-6) {
    throw std::invalid_argument("token_entropy: probabilities sum to " +
                                std::to_string(mass));
  }
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

int argmax_class(const std::vector<double>& probs) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(probs.size()); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

double median(std::vector<double> values) {
  if (values.empty()) {
    throw std::invalid_argument("median: empty list");
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

ThresholdTable build_threshold_table_from_probs(
    const std::vector<std::vector<double>>& o_token_probs, int old_class_count) {
  if (old_class_count < 1) {
    throw std::invalid_argument("threshold table: old class count must be >= 1");
  }
  std::vector<std::vector<double>> groups(old_class_count);
  for (const auto& probs : o_token_probs) {
    if (static_cast<int>(probs.size()) != old_class_count) {
      throw std::invalid_argument("threshold table: probability row of size " +
                                  std::to_string(probs.size()) + ", expected " +
                                  std::to_string(old_class_count));
    }
    groups[argmax_class(probs)].push_back(token_entropy(probs));
  }
  ThresholdTable table;
  table.tau.assign(old_class_count, 0.0);
  table.has_tau.assign(old_class_count, false);
  table.group_size.assign(old_class_count, 0);
  for (int c = 0; c < old_class_count; ++c) {
    table.group_size[c] = static_cast<int>(groups[c].size());
    if (!groups[c].empty()) {
      table.tau[c] = median(groups[c]);
      table.has_tau[c] = true;
    }
  }
  return table;
}

int vanilla_pseudo_target(int gt_class, const std::vector<double>& old_probs) {
  if (gt_class != LabelSchema::kOutside) {
    return gt_class;
  }
  return argmax_class(old_probs);
}

int confident_pseudo_target(int gt_class, const std::vector<double>& old_probs,
                            const ThresholdTable& table) {
  if (gt_class != LabelSchema::kOutside) {
    return gt_class;
  }
  const int predicted = argmax_class(old_probs);
  if (predicted >= table.old_class_count() || !table.has_tau[predicted]) {
    return kIgnoreTarget;
  }
  const double u = token_entropy(old_probs);
  return u < table.tau[predicted] ? predicted : kIgnoreTarget;
}

namespace {

// Softmax rows of the old model's logits for one sentence.
std::vector<std::vector<double>> old_model_probs(const TaggerModel& old_model,
                                                 const std::vector<int>& ids) {
  ForwardResult result = old_model.forward(ids);
  const int n = result.logits.shape()[0];
  const int classes = result.logits.shape()[1];
  Tensor probs = softmax_last(result.logits);
  std::vector<std::vector<double>> rows(n);
  for (int i = 0; i < n; ++i) {
    rows[i].assign(probs.value().begin() + static_cast<std::size_t>(i) * classes,
                   probs.value().begin() + static_cast<std::size_t>(i + 1) * classes);
  }
  return rows;
}

std::vector<int> encode_tokens(const Sentence& s, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(s.tokens.size());
  for (const std::string& token : s.tokens) {
    ids.push_back(vocab.encode(token));
  }
  return ids;
}

std::vector<int> gt_classes(const Sentence& s, const LabelSchema& schema) {
  std::vector<int> out;
  out.reserve(s.labels.size());
  for (const std::string& label : s.labels) {
    out.push_back(schema.class_index(label));
  }
  return out;
}

}  // namespace

PseudoPrepass build_pseudo_targets(PseudoMode mode, const std::vector<Sentence>& train,
                                   const TaggerModel* old_model, const Vocabulary& vocab,
                                   const LabelSchema& schema) {
  PseudoPrepass prepass;
  prepass.targets.reserve(train.size());

  if (mode == PseudoMode::None || old_model == nullptr) {
    for (const Sentence& s : train) {
      prepass.targets.push_back(gt_classes(s, schema));
    }
    return prepass;
  }

  const int old_classes = old_model->class_count();

  // One inference pass caches the old model's rows; with CPL the same rows
  // first feed the threshold table.
  std::vector<std::vector<std::vector<double>>> all_probs;
  all_probs.reserve(train.size());
  for (const Sentence& s : train) {
    all_probs.push_back(old_model_probs(*old_model, encode_tokens(s, vocab)));
  }

  if (mode == PseudoMode::CPL) {
    std::vector<std::vector<double>> o_rows;
    for (std::size_t si = 0; si < train.size(); ++si) {
      const std::vector<int> gts = gt_classes(train[si], schema);
      for (std::size_t i = 0; i < gts.size(); ++i) {
        if (gts[i] == LabelSchema::kOutside) {
          o_rows.push_back(all_probs[si][i]);
        }
      }
    }
    prepass.table = build_threshold_table_from_probs(o_rows, old_classes);
  }

  for (std::size_t si = 0; si < train.size(); ++si) {
    const std::vector<int> gts = gt_classes(train[si], schema);
    std::vector<int> targets(gts.size());
    for (std::size_t i = 0; i < gts.size(); ++i) {
      targets[i] = mode == PseudoMode::VPL
                       ? vanilla_pseudo_target(gts[i], all_probs[si][i])
                       : confident_pseudo_target(gts[i], all_probs[si][i], prepass.table);
    }
    prepass.targets.push_back(std::move(targets));
  }
  return prepass;
}

void dump_pseudo_targets(const std::string& path, const std::vector<Sentence>& train,
                         const PseudoPrepass& prepass, const LabelSchema& schema) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("dump_pseudo_targets: cannot open " + path);
  }
  for (std::size_t si = 0; si < train.size(); ++si) {
    const Sentence& s = train[si];
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      const int target = prepass.targets[si][i];
      out << s.tokens[i] << ' ' << s.labels[i] << ' '
          << (target == kIgnoreTarget ? "IGN" : schema.class_name(target)) << '\n';
    }
    out << '\n';
  }
}

}  // namespace cpfd
