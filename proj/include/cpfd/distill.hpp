#pragma once

#include <string>

#include "cpfd/model.hpp"
#include "cpfd/tensor.hpp"

namespace cpfd {

enum class DistillVariant { None, FD, PFDLax, PFD };

DistillVariant distill_variant_from_string(const std::string& name);
std::string to_string(DistillVariant v);

struct DistillConfig {
  DistillVariant variant = DistillVariant::PFD;
  double lambda = 2.0;        // weight on the attention distillation term
  double kl_weight = 1.0;     // weight on the logit KL penalty
  double kl_temperature = 1.0;

  void validate() const;
};

// Rigid attention distillation: the elementwise squared difference between
// the two stacks, summed over layers, heads and both sequence axes.
Tensor fd_loss(const AttentionStack& attn_new, const AttentionStack& attn_old);

// Fully pooled variant: both sequence axes are summed away before the squared
// difference, leaving one mass per head. Row-stochastic inputs of equal
// length make this identically zero.
Tensor pfd_lax_loss(const AttentionStack& attn_new, const AttentionStack& attn_old);

// Pooled distillation, one pooled axis per term.
struct PfdTerms {
  Tensor heads_pooled;    // sum over heads, compared per (query, key)
  Tensor queries_pooled;  // sum over queries, compared per (head, key)
  Tensor keys_pooled;     // sum over keys, compared per (head, query)
};

PfdTerms pfd_loss_terms(const AttentionStack& attn_new, const AttentionStack& attn_old);
Tensor pfd_loss(const AttentionStack& attn_new, const AttentionStack& attn_old);

Tensor distill_loss(DistillVariant variant, const AttentionStack& attn_new,
                    const AttentionStack& attn_old);

// Mean per-token KL(softmax(old/T) || softmax(new[:, :C_old]/T)). The new
// logits are restricted to the old model's classes; the old side carries no
// gradient by construction (frozen model).
Tensor kl_logit_loss(const Tensor& logits_new, const Tensor& logits_old,
                     double temperature = 1.0);

}  // namespace cpfd
