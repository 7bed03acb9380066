#pragma once

#include <vector>

#include "cpfd/distill.hpp"
#include "cpfd/schema.hpp"
#include "cpfd/tensor.hpp"

namespace cpfd {

// Token counts behind the adaptive re-weighting, plus the weight applied to
// every old-entity-targeted token. New-type, "O"-targeted and ignored tokens
// always weigh 1.0; old-type tokens weigh 0.5 + sigmoid(N_old / N_new),
// falling back to the limit 1.5 when the batch has no new-type tokens.
struct ReweightPlan {
  long n_old = 0;
  long n_new = 0;
  double old_type_weight = 1.0;
};

double logistic(double x);

// `targets` are pseudo-target classes (kIgnoreTarget allowed) over whatever
// scope the plan covers — one batch or the whole step dataset.
ReweightPlan compute_weights(const std::vector<int>& targets, const LabelSchema& schema,
                             int step);

double token_weight(const ReweightPlan& plan, int target, const LabelSchema& schema,
                    int step);

// Eq.-style balanced cross entropy: -(1/n) sum_i eta_i * log p(target_i),
// with ignored rows contributing exactly zero but still counted in n.
Tensor balanced_pseudo_ce(const Tensor& logits, const std::vector<int>& targets,
                          const std::vector<double>& eta);

// ce + lambda * distill + kl_weight * kl. Undefined tensors stand for absent
// terms (step 1 has neither distillation nor KL source).
Tensor total_loss(const Tensor& ce, const Tensor& distill, const Tensor& kl,
                  const DistillConfig& config);

}  // namespace cpfd
