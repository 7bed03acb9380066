#pragma once

#include <map>
#include <string>
#include <vector>

namespace cpfd {

struct EntitySpan {
  std::string type;
  int start = 0;
  int end = 0;  // inclusive

  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
  friend auto operator<=>(const EntitySpan&, const EntitySpan&) = default;
};

// Maximal B-X (I-X)* runs. Lenient on dangling I-X: a continuation without a
// live same-type span opens a new span, matching conlleval behavior.
std::vector<EntitySpan> decode_bio(const std::vector<std::string>& labels);

struct TypePRF {
  long tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct StepMetrics {
  int step = 0;
  double micro_precision = 0.0, micro_recall = 0.0, micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::map<std::string, TypePRF> per_type;
};

// Exact (type, start, end) span matching per sentence; micro pools TP/FP/FN
// over the given types, macro averages per-type F1 over them. All
// zero-denominator ratios are 0. Throws on an empty type set or mismatched
// sentence counts.
StepMetrics f1_scores(const std::vector<std::vector<std::string>>& pred,
                      const std::vector<std::vector<std::string>>& gold,
                      const std::vector<std::string>& types);

struct RunSummary {
  std::vector<StepMetrics> steps;
  double mean_micro_f1 = 0.0;
  double mean_macro_f1 = 0.0;
};

// Mean over all steps, first included; the per-step series is kept verbatim.
RunSummary aggregate_run(const std::vector<StepMetrics>& steps);

}  // namespace cpfd
