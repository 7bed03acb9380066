#include "cpfd/eval.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "cpfd/corpus.hpp"

namespace cpfd {

std::vector<EntitySpan> decode_bio(const std::vector<std::string>& labels) {
  std::vector<EntitySpan> spans;
  std::string open_type;
  int open_start = -1;
  auto close = [&](int end) {
    if (!open_type.empty()) {
      spans.push_back({open_type, open_start, end});
      open_type.clear();
    }
  };
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    const std::string& label = labels[i];
    if (label == "O") {
      close(i - 1);
    } else if (label[0] == 'B') {
      close(i - 1);
      open_type = label_type(label);
      open_start = i;
    } else {  // I-X
      const std::string type = label_type(label);
      if (type != open_type) {
        close(i - 1);
        open_type = type;
        open_start = i;
      }
    }
  }
  close(static_cast<int>(labels.size()) - 1);
  return spans;
}

StepMetrics f1_scores(const std::vector<std::vector<std::string>>& pred,
                      const std::vector<std::vector<std::string>>& gold,
                      const std::vector<std::string>& types) {
  if (types.empty()) {
    throw std::invalid_argument("f1_scores: empty type set");
  }
  if (pred.size() != gold.size()) {
    throw std::invalid_argument("f1_scores: " + std::to_string(pred.size()) +
                                " predictions vs " + std::to_string(gold.size()) +
                                " references");
  }
  StepMetrics metrics;
  for (const std::string& type : types) {
    metrics.per_type[type] = TypePRF{};
  }
  for (std::size_t s = 0; s < pred.size(); ++s) {
    const std::vector<EntitySpan> p = decode_bio(pred[s]);
    const std::vector<EntitySpan> g = decode_bio(gold[s]);
    const std::set<EntitySpan> gset(g.begin(), g.end());
    const std::set<EntitySpan> pset(p.begin(), p.end());
    for (const EntitySpan& span : pset) {
      auto it = metrics.per_type.find(span.type);
      if (it == metrics.per_type.end()) continue;  // type outside this step's view
      if (gset.count(span)) {
        it->second.tp += 1;
      } else {
        it->second.fp += 1;
      }
    }
    for (const EntitySpan& span : gset) {
      auto it = metrics.per_type.find(span.type);
      if (it == metrics.per_type.end()) continue;
      if (!pset.count(span)) {
        it->second.fn += 1;
      }
    }
  }

  auto safe_div = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
  long tp = 0, fp = 0, fn = 0;
  double macro_sum = 0.0;
  for (auto& [type, prf] : metrics.per_type) {
    prf.precision = safe_div(static_cast<double>(prf.tp), static_cast<double>(prf.tp + prf.fp));
    prf.recall = safe_div(static_cast<double>(prf.tp), static_cast<double>(prf.tp + prf.fn));
    prf.f1 = safe_div(2.0 * prf.precision * prf.recall, prf.precision + prf.recall);
    tp += prf.tp;
    fp += prf.fp;
    fn += prf.fn;
    macro_sum += prf.f1;
  }
  metrics.micro_precision = safe_div(static_cast<double>(tp), static_cast<double>(tp + fp));
  metrics.micro_recall = safe_div(static_cast<double>(tp), static_cast<double>(tp + fn));
  metrics.micro_f1 = safe_div(2.0 * metrics.micro_precision * metrics.micro_recall,
                              metrics.micro_precision + metrics.micro_recall);
  metrics.macro_f1 = macro_sum / static_cast<double>(metrics.per_type.size());
  return metrics;
}

RunSummary aggregate_run(const std::vector<StepMetrics>& steps) {
  if (steps.empty()) {
    throw std::invalid_argument("aggregate_run: empty metric series");
  }
  RunSummary summary;
  summary.steps = steps;
  for (const StepMetrics& m : steps) {
    summary.mean_micro_f1 += m.micro_f1;
    summary.mean_macro_f1 += m.macro_f1;
  }
  summary.mean_micro_f1 /= static_cast<double>(steps.size());
  summary.mean_macro_f1 /= static_cast<double>(steps.size());
  return summary;
}

}  // namespace cpfd
