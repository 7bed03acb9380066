#include <cmath>

#include <doctest.h>

#include "cpfd/balance.hpp"
#include "cpfd/pseudo.hpp"
#include "support/gradcheck.hpp"

using namespace cpfd;

namespace {

// Two steps, one type each: classes O, B-ALPHA, I-ALPHA, B-BETA, I-BETA.
const LabelSchema& two_step_schema() {
  static const LabelSchema schema = LabelSchema::build({{"ALPHA"}, {"BETA"}});
  return schema;
}

}  // namespace

TEST_CASE("weights: new-type and O-targeted tokens always weigh 1") {
  const LabelSchema& schema = two_step_schema();
  const int b_alpha = schema.class_index("B-ALPHA");
  const int b_beta = schema.class_index("B-BETA");
  const std::vector<int> targets = {b_alpha, b_beta, 0, kIgnoreTarget};
  const ReweightPlan plan = compute_weights(targets, schema, 2);
  CHECK(plan.n_old == 1);
  CHECK(plan.n_new == 1);
  CHECK(token_weight(plan, b_beta, schema, 2) == 1.0);
  CHECK(token_weight(plan, 0, schema, 2) == 1.0);
  CHECK(token_weight(plan, kIgnoreTarget, schema, 2) == 1.0);
}

TEST_CASE("weights: balanced counts give 0.5 + sigmoid(1)") {
  const LabelSchema& schema = two_step_schema();
  const std::vector<int> targets = {schema.class_index("B-ALPHA"),
                                    schema.class_index("B-BETA")};
  const ReweightPlan plan = compute_weights(targets, schema, 2);
  CHECK(plan.old_type_weight == doctest::Approx(0.5 + logistic(1.0)).epsilon(1e-9));
  CHECK(plan.old_type_weight == doctest::Approx(1.231059).epsilon(1e-6));
}

TEST_CASE("weights: no old tokens means every weight is 1") {
  const LabelSchema& schema = two_step_schema();
  const std::vector<int> targets = {schema.class_index("B-BETA"), 0, 0};
  const ReweightPlan plan = compute_weights(targets, schema, 2);
  CHECK(plan.n_old == 0);
  CHECK(plan.old_type_weight == 1.0);
}

TEST_CASE("weights: no new tokens falls back to the 1.5 limit") {
  const LabelSchema& schema = two_step_schema();
  const std::vector<int> targets = {schema.class_index("B-ALPHA"),
                                    schema.class_index("I-ALPHA")};
  const ReweightPlan plan = compute_weights(targets, schema, 2);
  CHECK(plan.old_type_weight == 1.5);
}

TEST_CASE("weights grow with n_old and stay inside [1, 1.5]") {
  const LabelSchema& schema = two_step_schema();
  const int b_alpha = schema.class_index("B-ALPHA");
  const int b_beta = schema.class_index("B-BETA");
  double previous = 1.0;
  std::vector<int> targets = {b_beta, b_beta, b_beta};
  for (int n_old = 1; n_old <= 24; ++n_old) {
    targets.push_back(b_alpha);
    const ReweightPlan plan = compute_weights(targets, schema, 2);
    CHECK(plan.old_type_weight >= previous);
    CHECK(plan.old_type_weight > 1.0);
    CHECK(plan.old_type_weight <= 1.5);
    previous = plan.old_type_weight;
  }
}

TEST_CASE("balanced CE: all-ignored rows give exactly zero") {
  Tensor logits = Tensor::from_data({2, 3}, {1.0, -2.0, 0.5, 0.0, 0.3, -0.1});
  const std::vector<int> targets = {kIgnoreTarget, kIgnoreTarget};
  const std::vector<double> eta = {1.0, 1.0};
  CHECK(balanced_pseudo_ce(logits, targets, eta).item() == 0.0);
}

TEST_CASE("balanced CE: uniform logits cost ln C") {
  Tensor logits = Tensor::zeros({1, 7});
  CHECK(balanced_pseudo_ce(logits, {3}, {1.0}).item() ==
        doctest::Approx(std::log(7.0)).epsilon(1e-12));
}

TEST_CASE("balanced CE: worked weighted mean") {
  // Per-token cross entropies 0.5 and 1.0 by construction.
  const double p1 = std::exp(-0.5), p2 = std::exp(-1.0);
  Tensor logits = Tensor::from_data(
      {2, 2}, {std::log(p1), std::log(1.0 - p1), std::log(p2), std::log(1.0 - p2)});
  const double eta2 = 1.2310586;
  const double loss =
      balanced_pseudo_ce(logits, {0, 0}, {1.0, eta2}).item();
  CHECK(loss == doctest::Approx((1.0 * 0.5 + eta2 * 1.0) / 2.0).epsilon(1e-9));
  CHECK(loss == doctest::Approx(0.865529).epsilon(1e-6));
}

TEST_CASE("balanced CE with unit weights equals plain CE exactly") {
  Rng rng(91);
  Tensor logits = testsupport::random_tensor({4, 5}, rng, 2.0, false);
  const std::vector<int> targets = {1, 0, 4, 2};
  const double weighted =
      balanced_pseudo_ce(logits, targets, {1.0, 1.0, 1.0, 1.0}).item();
  // plain CE computed directly from log-softmax rows
  Tensor logp = log_softmax_last(logits);
  double expected = 0.0;
  for (int i = 0; i < 4; ++i) expected -= logp.value()[i * 5 + targets[i]];
  expected /= 4.0;
  CHECK(weighted == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("balanced CE rejects mismatched rows and bad targets") {
  Tensor logits = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(balanced_pseudo_ce(logits, {0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(balanced_pseudo_ce(logits, {0, 3}, {1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("balanced CE gradient matches finite differences") {
  Rng rng(97);
  Tensor logits = testsupport::random_tensor({3, 4}, rng, 2.0, true);
  const std::vector<int> targets = {2, kIgnoreTarget, 0};
  const std::vector<double> eta = {1.0, 1.0, 1.3};
  auto build = [&] { return balanced_pseudo_ce(logits, targets, eta); };
  CHECK(testsupport::max_grad_rel_error({logits}, build) < 1e-4);
}

TEST_CASE("total loss assembly") {
  DistillConfig cfg;
  cfg.lambda = 2.0;
  cfg.kl_weight = 0.0;
  Tensor ce = Tensor::scalar(0.5);
  Tensor pfd = Tensor::scalar(0.25);
  CHECK(total_loss(ce, pfd, Tensor(), cfg).item() == doctest::Approx(1.0).epsilon(1e-12));

  cfg.lambda = 0.0;
  CHECK(total_loss(ce, pfd, Tensor(), cfg).item() == doctest::Approx(0.5).epsilon(1e-12));

  cfg.lambda = 2.0;
  cfg.kl_weight = 0.5;
  Tensor kl = Tensor::scalar(0.2);
  CHECK(total_loss(ce, pfd, kl, cfg).item() == doctest::Approx(1.1).epsilon(1e-12));

  // step 1: no distillation source, plain CE
  CHECK(total_loss(ce, Tensor(), Tensor(), cfg).item() == doctest::Approx(0.5));
}

TEST_CASE("distill config validation") {
  DistillConfig cfg;
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = DistillConfig{};
  cfg.kl_temperature = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
