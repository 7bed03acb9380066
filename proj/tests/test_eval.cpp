#include <algorithm>

#include <doctest.h>

#include "cpfd/eval.hpp"
#include "cpfd/rng.hpp"
#include "support/span_oracle.hpp"

using namespace cpfd;
using testsupport::all_sequences;
using testsupport::brute_force_f1;
using testsupport::brute_force_spans;

TEST_CASE("decode: basic runs") {
  CHECK(decode_bio({"B-PER", "I-PER", "O"}) == std::vector<EntitySpan>{{"PER", 0, 1}});
  CHECK(decode_bio({"O", "O"}).empty());
  CHECK(decode_bio({"I-ORG", "I-ORG"}) == std::vector<EntitySpan>{{"ORG", 0, 1}});
  CHECK(decode_bio({"B-A", "B-A"}) ==
        std::vector<EntitySpan>{{"A", 0, 0}, {"A", 1, 1}});
  CHECK(decode_bio({"B-A", "I-B"}) ==
        std::vector<EntitySpan>{{"A", 0, 0}, {"B", 1, 1}});
}

TEST_CASE("decode agrees with the brute-force oracle on all sequences up to length 4") {
  const std::vector<std::string> types = {"A", "B"};
  for (int length = 1; length <= 4; ++length) {
    for (const auto& seq : all_sequences(length, types)) {
      auto fast = decode_bio(seq);
      auto slow = brute_force_spans(seq, types);
      std::sort(fast.begin(), fast.end());
      std::sort(slow.begin(), slow.end());
      CHECK(fast == slow);
    }
  }
}

TEST_CASE("f1: perfect predictions score 1") {
  const std::vector<std::vector<std::string>> gold = {{"B-A", "I-A", "O", "B-B"}};
  const StepMetrics m = f1_scores(gold, gold, {"A", "B"});
  CHECK(m.micro_f1 == 1.0);
  CHECK(m.macro_f1 == 1.0);
}

TEST_CASE("f1: the 2-of-3-vs-4 worked case gives micro 4/7") {
  // gold: four A spans; pred: three A spans, two exactly right
  const std::vector<std::vector<std::string>> gold = {
      {"B-A", "O", "B-A", "O", "B-A", "O", "B-A", "O"}};
  const std::vector<std::vector<std::string>> pred = {
      {"B-A", "O", "B-A", "O", "O", "B-A", "O", "O"}};
  const StepMetrics m = f1_scores(pred, gold, {"A"});
  CHECK(m.micro_precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.micro_recall == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m.micro_f1 == doctest::Approx(4.0 / 7.0).epsilon(1e-9));
}

TEST_CASE("f1: no predictions on nonempty gold scores 0") {
  const std::vector<std::vector<std::string>> gold = {{"B-A", "I-A"}};
  const std::vector<std::vector<std::string>> pred = {{"O", "O"}};
  const StepMetrics m = f1_scores(pred, gold, {"A"});
  CHECK(m.micro_f1 == 0.0);
  CHECK(m.macro_f1 == 0.0);
}

TEST_CASE("f1: micro equals macro with a single type") {
  Rng rng(3);
  const std::vector<std::string> alphabet = {"O", "B-A", "I-A"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> pred(6), gold(6);
    for (int i = 0; i < 6; ++i) {
      pred[i] = alphabet[rng.uniform_int(3)];
      gold[i] = alphabet[rng.uniform_int(3)];
    }
    const StepMetrics m = f1_scores({pred}, {gold}, {"A"});
    CHECK(m.micro_f1 == doctest::Approx(m.macro_f1).epsilon(1e-12));
  }
}

TEST_CASE("f1: invariant under sentence reordering") {
  const std::vector<std::vector<std::string>> gold = {
      {"B-A", "O"}, {"B-B", "I-B"}, {"O", "B-A"}};
  const std::vector<std::vector<std::string>> pred = {
      {"B-A", "O"}, {"O", "I-B"}, {"B-B", "O"}};
  const StepMetrics forward = f1_scores(pred, gold, {"A", "B"});
  std::vector<std::vector<std::string>> gold_r = {gold[2], gold[0], gold[1]};
  std::vector<std::vector<std::string>> pred_r = {pred[2], pred[0], pred[1]};
  const StepMetrics reordered = f1_scores(pred_r, gold_r, {"A", "B"});
  CHECK(forward.micro_f1 == reordered.micro_f1);
  CHECK(forward.macro_f1 == reordered.macro_f1);
}

TEST_CASE("f1 agrees with the brute-force matcher on random pairs") {
  Rng rng(13);
  const std::vector<std::string> types = {"A", "B"};
  const std::vector<std::string> alphabet = {"O", "B-A", "I-A", "B-B", "I-B"};
  for (int trial = 0; trial < 500; ++trial) {
    const int length = 1 + static_cast<int>(rng.uniform_int(6));
    std::vector<std::string> pred(length), gold(length);
    for (int i = 0; i < length; ++i) {
      pred[i] = alphabet[rng.uniform_int(5)];
      gold[i] = alphabet[rng.uniform_int(5)];
    }
    const StepMetrics fast = f1_scores({pred}, {gold}, types);
    const auto slow = brute_force_f1({pred}, {gold}, types);
    CHECK(fast.micro_f1 == doctest::Approx(slow.micro_f1).epsilon(1e-12));
    CHECK(fast.macro_f1 == doctest::Approx(slow.macro_f1).epsilon(1e-12));
  }
}

TEST_CASE("f1 rejects an empty type set and mismatched counts") {
  const std::vector<std::vector<std::string>> one = {{"O"}};
  CHECK_THROWS_AS(f1_scores(one, one, {}), std::invalid_argument);
  CHECK_THROWS_AS(f1_scores(one, {}, {"A"}), std::invalid_argument);
}

TEST_CASE("aggregate: mean over steps including the first") {
  StepMetrics s1, s2;
  s1.step = 1;
  s1.micro_f1 = 1.0;
  s1.macro_f1 = 0.8;
  s2.step = 2;
  s2.micro_f1 = 0.5;
  s2.macro_f1 = 0.4;
  const RunSummary summary = aggregate_run({s1, s2});
  CHECK(summary.mean_micro_f1 == doctest::Approx(0.75));
  CHECK(summary.mean_macro_f1 == doctest::Approx(0.6));
  REQUIRE(summary.steps.size() == 2);  // series preserved verbatim
  CHECK(summary.steps[0].micro_f1 == 1.0);
  CHECK(summary.steps[1].micro_f1 == 0.5);

  const RunSummary single = aggregate_run({s2});
  CHECK(single.mean_micro_f1 == 0.5);
  CHECK_THROWS_AS(aggregate_run({}), std::invalid_argument);
}
