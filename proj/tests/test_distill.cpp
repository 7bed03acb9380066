#include <cmath>

#include <doctest.h>

#include "cpfd/distill.hpp"
#include "support/gradcheck.hpp"

using namespace cpfd;
using testsupport::random_stack;
using testsupport::random_stochastic_stack;

namespace {

// The worked single-layer, single-head pair: old is the uniform 2x2 map,
// new is the identity permutation map.
AttentionStack worked_new() {
  AttentionStack s;
  s.layers.push_back(Tensor::from_data({1, 2, 2}, {1.0, 0.0, 0.0, 1.0}));
  return s;
}

AttentionStack worked_old() {
  AttentionStack s;
  s.layers.push_back(Tensor::from_data({1, 2, 2}, {0.5, 0.5, 0.5, 0.5}));
  return s;
}

AttentionStack copy_of(const AttentionStack& s) {
  AttentionStack out;
  for (const Tensor& layer : s.layers) {
    out.layers.push_back(Tensor::from_data(layer.shape(), layer.value()));
  }
  return out;
}

}  // namespace

TEST_CASE("fd loss on the worked 2x2 pair is exactly 1") {
  CHECK(fd_loss(worked_new(), worked_old()).item() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pfd-lax on the worked pair vanishes: both total masses are 2") {
  CHECK(pfd_lax_loss(worked_new(), worked_old()).item() ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pfd on the worked pair: head term 1, query and key terms 0") {
  const PfdTerms terms = pfd_loss_terms(worked_new(), worked_old());
  CHECK(terms.heads_pooled.item() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(terms.queries_pooled.item() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(terms.keys_pooled.item() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(pfd_loss(worked_new(), worked_old()).item() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("identical stacks give zero under every variant") {
  Rng rng(17);
  const AttentionStack a = random_stochastic_stack(2, 3, 4, rng);
  const AttentionStack b = copy_of(a);
  CHECK(fd_loss(a, b).item() == 0.0);
  CHECK(pfd_loss(a, b).item() == 0.0);
  CHECK(pfd_lax_loss(a, b).item() == 0.0);
}

TEST_CASE("fd is strictly positive when any element differs") {
  AttentionStack a = worked_new();
  AttentionStack b = copy_of(a);
  b.layers[0].mutable_value()[1] += 1e-6;
  CHECK(fd_loss(a, b).item() > 0.0);
}

TEST_CASE("row-stochastic algebra: lax and key-pooled terms vanish") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int heads = 1 + static_cast<int>(rng.uniform_int(3));
    const int n = 1 + static_cast<int>(rng.uniform_int(5));
    const AttentionStack a = random_stochastic_stack(2, heads, n, rng);
    const AttentionStack b = random_stochastic_stack(2, heads, n, rng);
    CHECK(std::abs(pfd_lax_loss(a, b).item()) < 1e-9);
    CHECK(std::abs(pfd_loss_terms(a, b).keys_pooled.item()) < 1e-9);
  }
}

TEST_CASE("single-head pooling over heads reduces to fd") {
  Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const AttentionStack a = random_stochastic_stack(2, 1, 4, rng);
    const AttentionStack b = random_stochastic_stack(2, 1, 4, rng);
    const double fd = fd_loss(a, b).item();
    const double head_term = pfd_loss_terms(a, b).heads_pooled.item();
    CHECK(head_term == doctest::Approx(fd).epsilon(1e-9));
  }
}

TEST_CASE("losses are invariant under a shared head permutation") {
  Rng rng(41);
  const int heads = 3, n = 4;
  const AttentionStack a = random_stochastic_stack(1, heads, n, rng);
  const AttentionStack b = random_stochastic_stack(1, heads, n, rng);
  const std::vector<int> perm = {2, 0, 1};
  auto permute = [&](const AttentionStack& s) {
    AttentionStack out;
    std::vector<double> data(s.layers[0].value().size());
    const std::size_t block = static_cast<std::size_t>(n) * n;
    for (int k = 0; k < heads; ++k) {
      const double* src = s.layers[0].value().data() + static_cast<std::size_t>(perm[k]) * block;
      std::copy(src, src + block, data.data() + static_cast<std::size_t>(k) * block);
    }
    out.layers.push_back(Tensor::from_data({heads, n, n}, std::move(data)));
    return out;
  };
  const AttentionStack pa = permute(a);
  const AttentionStack pb = permute(b);
  CHECK(fd_loss(pa, pb).item() == doctest::Approx(fd_loss(a, b).item()).epsilon(1e-12));
  CHECK(pfd_loss(pa, pb).item() == doctest::Approx(pfd_loss(a, b).item()).epsilon(1e-12));
  CHECK(pfd_lax_loss(pa, pb).item() ==
        doctest::Approx(pfd_lax_loss(a, b).item()).epsilon(1e-12));
}

TEST_CASE("shape mismatches are rejected") {
  Rng rng(43);
  const AttentionStack a = random_stochastic_stack(1, 2, 3, rng);
  const AttentionStack b = random_stochastic_stack(1, 2, 4, rng);
  CHECK_THROWS_AS(fd_loss(a, b), std::invalid_argument);
  CHECK_THROWS_AS(pfd_loss(a, b), std::invalid_argument);
  CHECK_THROWS_AS(pfd_lax_loss(a, b), std::invalid_argument);
  const AttentionStack c = random_stochastic_stack(2, 2, 3, rng);
  CHECK_THROWS_AS(fd_loss(a, c), std::invalid_argument);
}

TEST_CASE("distillation gradients match finite differences") {
  Rng rng(47);
  AttentionStack a = random_stack(2, 2, 3, rng, true);
  const AttentionStack b = random_stack(2, 2, 3, rng, false);
  CHECK(testsupport::max_grad_rel_error(a.layers, [&] { return fd_loss(a, b); }) < 1e-4);
  CHECK(testsupport::max_grad_rel_error(a.layers, [&] { return pfd_loss(a, b); }) < 1e-4);
  CHECK(testsupport::max_grad_rel_error(a.layers, [&] { return pfd_lax_loss(a, b); }) <
        1e-4);
}

TEST_CASE("degenerate n=1 sequences: only head pooling can differ") {
  AttentionStack a, b;
  a.layers.push_back(Tensor::from_data({2, 1, 1}, {1.0, 1.0}));
  b.layers.push_back(Tensor::from_data({2, 1, 1}, {1.0, 1.0}));
  CHECK(fd_loss(a, b).item() == 0.0);
  CHECK(pfd_loss(a, b).item() == 0.0);
  CHECK(pfd_lax_loss(a, b).item() == 0.0);
}

TEST_CASE("kl logit loss: restriction to shared classes, worked value") {
  // old logits [0, 0] -> uniform; restricted new logits [ln 3, 0] -> (0.75, 0.25)
  Tensor logits_old = Tensor::from_data({1, 2}, {0.0, 0.0});
  Tensor logits_new = Tensor::from_data({1, 3}, {std::log(3.0), 0.0, -4.0});
  const double kl = kl_logit_loss(logits_new, logits_old).item();
  const double expected = 0.5 * std::log(0.5 / 0.75) + 0.5 * std::log(0.5 / 0.25);
  CHECK(kl == doctest::Approx(expected).epsilon(1e-9));
  CHECK(kl == doctest::Approx(0.14384).epsilon(1e-4));
}

TEST_CASE("kl logit loss is zero on identical restricted logits") {
  Tensor logits_old = Tensor::from_data({2, 2}, {0.3, -0.7, 1.1, 0.2});
  Tensor logits_new = Tensor::from_data({2, 3}, {0.3, -0.7, -2.0, 1.1, 0.2, -3.0});
  CHECK(kl_logit_loss(logits_new, logits_old).item() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("kl logit loss is nonnegative on random inputs") {
  Rng rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor logits_old = testsupport::random_tensor({3, 4}, rng, 2.0, false);
    Tensor logits_new = testsupport::random_tensor({3, 6}, rng, 2.0, false);
    CHECK(kl_logit_loss(logits_new, logits_old).item() >= -1e-12);
  }
}

TEST_CASE("kl logit loss gradient matches finite differences") {
  Rng rng(59);
  Tensor logits_old = testsupport::random_tensor({3, 4}, rng, 1.5, false);
  Tensor logits_new = testsupport::random_tensor({3, 6}, rng, 1.5, true);
  auto build = [&] { return kl_logit_loss(logits_new, logits_old, 2.0); };
  CHECK(testsupport::max_grad_rel_error({logits_new}, build) < 1e-4);
}

TEST_CASE("kl logit loss rejects incompatible shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({3, 3});
  CHECK_THROWS_AS(kl_logit_loss(a, b), std::invalid_argument);
  Tensor wide = Tensor::zeros({2, 5});
  CHECK_THROWS_AS(kl_logit_loss(a, wide), std::invalid_argument);  // C_old > C_new
}

TEST_CASE("variant parsing round-trips") {
  CHECK(distill_variant_from_string("PFD") == DistillVariant::PFD);
  CHECK(distill_variant_from_string("PFD-lax") == DistillVariant::PFDLax);
  CHECK(distill_variant_from_string("FD") == DistillVariant::FD);
  CHECK(distill_variant_from_string("none") == DistillVariant::None);
  CHECK_THROWS_AS(distill_variant_from_string("pfdx"), std::invalid_argument);
  CHECK(to_string(DistillVariant::PFDLax) == "PFD-lax");
}
