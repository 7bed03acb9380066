#include "cpfd/distill.hpp"

#include <stdexcept>

namespace cpfd {

DistillVariant distill_variant_from_string(const std::string& name) {
  if (name == "none") return DistillVariant::None;
  if (name == "FD" || name == "fd") return DistillVariant::FD;
  if (name == "PFD-lax" || name == "pfd-lax") return DistillVariant::PFDLax;
  if (name == "PFD" || name == "pfd") return DistillVariant::PFD;
  throw std::invalid_argument("unknown distillation variant '" + name + "'");
}

std::string to_string(DistillVariant v) {
  switch (v) {
    case DistillVariant::None: return "none";
    case DistillVariant::FD: return "FD";
    case DistillVariant::PFDLax: return "PFD-lax";
    case DistillVariant::PFD: return "PFD";
  }
  return "none";
}

void DistillConfig::validate() const {
  if (lambda < 0.0 || kl_weight < 0.0) {
    throw std::invalid_argument("DistillConfig: loss weights must be nonnegative");
  }
  if (kl_temperature <= 0.0) {
    throw std::invalid_argument("DistillConfig: kl_temperature must be positive");
  }
}

namespace {

void check_stacks(const char* op, const AttentionStack& a, const AttentionStack& b) {
  if (a.layer_count() != b.layer_count()) {
    throw std::invalid_argument(std::string(op) + ": layer counts differ (" +
                                std::to_string(a.layer_count()) + " vs " +
                                std::to_string(b.layer_count()) + ")");
  }
  if (a.layer_count() == 0) {
    throw std::invalid_argument(std::string(op) + ": empty attention stacks");
  }
  for (int l = 0; l < a.layer_count(); ++l) {
    if (a.layers[l].shape() != b.layers[l].shape()) {
      throw std::invalid_argument(std::string(op) + ": layer " + std::to_string(l) +
                                  " shape mismatch " + shape_str(a.layers[l].shape()) +
                                  " vs " + shape_str(b.layers[l].shape()));
    }
  }
}

}  // namespace

Tensor fd_loss(const AttentionStack& attn_new, const AttentionStack& attn_old) {
  check_stacks("fd_loss", attn_new, attn_old);
  Tensor total = sum_sq_diff(attn_new.layers[0], attn_old.layers[0]);
  for (int l = 1; l < attn_new.layer_count(); ++l) {
    total = add(total, sum_sq_diff(attn_new.layers[l], attn_old.layers[l]));
  }
  return total;
}

Tensor pfd_lax_loss(const AttentionStack& attn_new, const AttentionStack& attn_old) {
  check_stacks("pfd_lax_loss", attn_new, attn_old);
  Tensor total;
  for (int l = 0; l < attn_new.layer_count(); ++l) {
    // [K, n, n] -> per-head total mass [K]
    Tensor mass_new = sum_axis(sum_axis(attn_new.layers[l], 2), 1);
    Tensor mass_old = sum_axis(sum_axis(attn_old.layers[l], 2), 1);
    Tensor term = sum_sq_diff(mass_new, mass_old);
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

PfdTerms pfd_loss_terms(const AttentionStack& attn_new, const AttentionStack& attn_old) {
  check_stacks("pfd_loss", attn_new, attn_old);
  PfdTerms terms;
  for (int l = 0; l < attn_new.layer_count(); ++l) {
    const Tensor& an = attn_new.layers[l];
    const Tensor& ao = attn_old.layers[l];
    Tensor a = sum_sq_diff(sum_axis(an, 0), sum_axis(ao, 0));  // pool heads
    Tensor b = sum_sq_diff(sum_axis(an, 1), sum_axis(ao, 1));  // pool queries
    Tensor c = sum_sq_diff(sum_axis(an, 2), sum_axis(ao, 2));  // pool keys
    terms.heads_pooled = terms.heads_pooled.defined() ? add(terms.heads_pooled, a) : a;
    terms.queries_pooled =
        terms.queries_pooled.defined() ? add(terms.queries_pooled, b) : b;
    terms.keys_pooled = terms.keys_pooled.defined() ? add(terms.keys_pooled, c) : c;
  }
  return terms;
}

Tensor pfd_loss(const AttentionStack& attn_new, const AttentionStack& attn_old) {
  PfdTerms terms = pfd_loss_terms(attn_new, attn_old);
  return add(terms.heads_pooled, add(terms.queries_pooled, terms.keys_pooled));
}

Tensor distill_loss(DistillVariant variant, const AttentionStack& attn_new,
                    const AttentionStack& attn_old) {
  switch (variant) {
    case DistillVariant::FD: return fd_loss(attn_new, attn_old);
    case DistillVariant::PFDLax: return pfd_lax_loss(attn_new, attn_old);
    case DistillVariant::PFD: return pfd_loss(attn_new, attn_old);
    case DistillVariant::None: break;
  }
  return Tensor::scalar(0.0);
}

Tensor kl_logit_loss(const Tensor& logits_new, const Tensor& logits_old,
                     double temperature) {
  if (logits_new.rank() != 2 || logits_old.rank() != 2 ||
      logits_new.shape()[0] != logits_old.shape()[0] ||
      logits_old.shape()[1] > logits_new.shape()[1]) {
    throw std::invalid_argument("kl_logit_loss: incompatible logits " +
                                shape_str(logits_new.shape()) + " vs " +
                                shape_str(logits_old.shape()));
  }
  if (temperature <= 0.0) {
    throw std::invalid_argument("kl_logit_loss: temperature must be positive");
  }
  const int tokens = logits_new.shape()[0];
  const int old_classes = logits_old.shape()[1];

  Tensor restricted = logits_new.shape()[1] == old_classes
                          ? logits_new
                          : slice_cols(logits_new, 0, old_classes);
  const double inv_t = 1.0 / temperature;
  Tensor logp_new = log_softmax_last(scale(restricted, inv_t));
  Tensor logp_old = log_softmax_last(scale(logits_old, inv_t));
  Tensor p_old = vexp(logp_old);
  // sum_i sum_c p_old * (logp_old - logp_new), averaged over tokens
  Tensor kl = sum_all(mul(p_old, sub(logp_old, logp_new)));
  return scale(kl, 1.0 / tokens);
}

}  // namespace cpfd
