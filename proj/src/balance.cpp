#include "cpfd/balance.hpp"

#include <cmath>
#include <stdexcept>

#include "cpfd/pseudo.hpp"

namespace cpfd {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

ReweightPlan compute_weights(const std::vector<int>& targets, const LabelSchema& schema,
                             int step) {
  ReweightPlan plan;
  for (int target : targets) {
    if (target == kIgnoreTarget) continue;
    if (schema.is_old_entity_class(target, step)) {
      plan.n_old += 1;
    } else if (schema.is_new_entity_class(target, step)) {
      plan.n_new += 1;
    }
  }
  if (plan.n_old == 0) {
    plan.old_type_weight = 1.0;  // vacuous, no old-type token exists
  } else if (plan.n_new == 0) {
    plan.old_type_weight = 1.5;  // limit of 0.5 + sigmoid as the ratio grows
  } else {
    plan.old_type_weight =
        0.5 + logistic(static_cast<double>(plan.n_old) / static_cast<double>(plan.n_new));
  }
  return plan;
}

double token_weight(const ReweightPlan& plan, int target, const LabelSchema& schema,
                    int step) {
  if (target != kIgnoreTarget && schema.is_old_entity_class(target, step)) {
    return plan.old_type_weight;
  }
  return 1.0;
}

Tensor balanced_pseudo_ce(const Tensor& logits, const std::vector<int>& targets,
                          const std::vector<double>& eta) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("balanced_pseudo_ce: logits must be rank-2, got " +
                                shape_str(logits.shape()));
  }
  const int n = logits.shape()[0];
  const int classes = logits.shape()[1];
  if (static_cast<int>(targets.size()) != n || static_cast<int>(eta.size()) != n) {
    throw std::invalid_argument("balanced_pseudo_ce: expected " + std::to_string(n) +
                                " targets/weights, got " + std::to_string(targets.size()) +
                                "/" + std::to_string(eta.size()));
  }
  std::vector<double> picks(static_cast<std::size_t>(n) * classes, 0.0);
  for (int i = 0; i < n; ++i) {
    const int target = targets[i];
    if (target == kIgnoreTarget) continue;
    if (target < 0 || target >= classes) {
      throw std::invalid_argument("balanced_pseudo_ce: target " + std::to_string(target) +
                                  " outside class range [0, " + std::to_string(classes) + ")");
    }
    picks[static_cast<std::size_t>(i) * classes + target] = eta[i];
  }
  Tensor weights = Tensor::from_data({n, classes}, std::move(picks));
  Tensor logp = log_softmax_last(logits);
  return scale(sum_all(mul(weights, logp)), -1.0 / n);
}

Tensor total_loss(const Tensor& ce, const Tensor& distill, const Tensor& kl,
                  const DistillConfig& config) {
  config.validate();
  Tensor total = ce;
  if (distill.defined() && config.lambda != 0.0) {
    total = add(total, scale(distill, config.lambda));
  }
  if (kl.defined() && config.kl_weight != 0.0) {
    total = add(total, scale(kl, config.kl_weight));
  }
  return total;
}

}  // namespace cpfd
