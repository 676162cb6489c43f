// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// Answer scoring: normalization, exact match, aligned token-bag F1, the
// numbers-must-match gate, answer buckets, and report arithmetic.

#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "evidr/evaluation.hpp"

using namespace evidr;
using Catch::Approx;

namespace {

using Strs = std::vector<std::string>;

AnswerSpec number_spec(double v) {
  AnswerSpec a;
  a.kind = AnswerKind::Number;
  a.number = v;
  return a;
}

AnswerSpec span_spec(Strs spans) {
  AnswerSpec a;
  a.kind = AnswerKind::Spans;
  a.spans = std::move(spans);
  return a;
}

AnswerSpec date_spec(std::string day, std::string month, std::string year) {
  AnswerSpec a;
  a.kind = AnswerKind::Date;
  a.date = DateAnswer{std::move(day), std::move(month), std::move(year)};
  return a;
}

}  // namespace

TEST_CASE("normalization lowercases, strips punctuation, and drops articles") {
  struct Row {
    const char* input;
    const char* expected;
  };
  const Row rows[] = {
      {"The Bears", "bears"},
      {"New York.", "new york"},
      {"Tom's run", "toms run"},
      {"93.10", "93.1"},
      {"1,234 yards", "1234 yards"},
      {"45%", "45"},
      {"seven", "7"},
      {"a an the", ""},
      {"7-yard run", "7yard run"},
      {"  two\tteams\n", "2 teams"},
      {"St. Louis", "st louis"},
      {"the   the  a", ""},
  };
  for (const Row& r : rows) {
    INFO("input: " << r.input);
    REQUIRE(normalized_string(r.input) == r.expected);
  }
}

TEST_CASE("exact match is multiset equality of normalized strings") {
  // Numeric surface variants collapse to one canonical rendering.
  auto [em1, f11] = em_f1({"93.1"}, {"93.10"});
  REQUIRE(em1 == 1.0);
  REQUIRE(f11 == 1.0);

  // Article and case differences do not break EM.
  auto [em2, f12] = em_f1({"the Bears"}, {"Bears"});
  REQUIRE(em2 == 1.0);
  REQUIRE(f12 == 1.0);

  // Multi-span answers match as sets, not sequences.
  auto [em3, f13] = em_f1({"Boston", "New York"}, {"New York", "Boston"});
  REQUIRE(em3 == 1.0);
  REQUIRE(f13 == 1.0);

  // A missing span breaks EM and halves F1.
  auto [em4, f14] = em_f1({"alpha"}, {"alpha", "beta"});
  REQUIRE(em4 == 0.0);
  REQUIRE(f14 == Approx(0.5));

  // Empty prediction scores zero on both metrics.
  auto [em5, f15] = em_f1({}, {"alpha"});
  REQUIRE(em5 == 0.0);
  REQUIRE(f15 == 0.0);

  // Empty gold can never be exactly matched.
  auto [em6, f16] = em_f1({}, {});
  REQUIRE(em6 == 0.0);
  REQUIRE(f16 == 0.0);
}

TEST_CASE("token-bag F1 rewards partial span overlap") {
  auto [em1, f11] = em_f1({"touchdown pass"}, {"touchdown"});
  REQUIRE(em1 == 0.0);
  REQUIRE(f11 == Approx(2.0 / 3.0));

  auto [em2, f12] = em_f1({"long touchdown pass today"}, {"touchdown pass"});
  REQUIRE(em2 == 0.0);
  REQUIRE(f12 == Approx(2.0 / 3.0));

  auto [em3, f13] = em_f1({"completely unrelated"}, {"touchdown pass"});
  REQUIRE(em3 == 0.0);
  REQUIRE(f13 == 0.0);

  // Bags are multisets: a repeated token only matches once.
  auto [em4, f14] = em_f1({"deep deep"}, {"deep"});
  REQUIRE(em4 == 0.0);
  REQUIRE(f14 == Approx(2.0 / 3.0));
}

TEST_CASE("gold numbers must be matched for a pairing to score") {
  // Token overlap alone is worthless when the gold number is missing.
  auto [em1, f11] = em_f1({"3 points"}, {"4 points"});
  REQUIRE(em1 == 0.0);
  REQUIRE(f11 == 0.0);

  // Sharing the number re-enables the bag score.
  auto [em2, f12] = em_f1({"4"}, {"4 points"});
  REQUIRE(em2 == 0.0);
  REQUIRE(f12 == Approx(2.0 / 3.0));

  // The gate only applies when the gold bag contains a number.
  auto [em3, f13] = em_f1({"scored points"}, {"points"});
  REQUIRE(em3 == 0.0);
  REQUIRE(f13 == Approx(2.0 / 3.0));

  // Numeric equivalence passes through normalization before the gate.
  auto [em4, f14] = em_f1({"4.0 points"}, {"4 points"});
  REQUIRE(em4 == 1.0);
  REQUIRE(f14 == 1.0);
}

TEST_CASE("alignment is optimal, not greedy") {
  // The in-order pairing scores 2/3 per pair; crossing scores 1.0.
  auto [em1, f11] = em_f1({"x y", "x"}, {"x", "x y"});
  REQUIRE(em1 == 1.0);
  REQUIRE(f11 == 1.0);

  // Only the crossed pairing has any overlap at all.
  auto [em2, f12] = em_f1({"s", "q"}, {"p q", "r s"});
  REQUIRE(em2 == 0.0);
  REQUIRE(f12 == Approx(2.0 / 3.0));

  // F1 is averaged over max(#gold, #pred).
  auto [em3, f13] = em_f1({"alpha"}, {"alpha", "beta", "gamma"});
  REQUIRE(em3 == 0.0);
  REQUIRE(f13 == Approx(1.0 / 3.0));

  auto [em4, f14] = em_f1({"alpha", "beta", "gamma"}, {"alpha"});
  REQUIRE(em4 == 0.0);
  REQUIRE(f14 == Approx(1.0 / 3.0));
}

TEST_CASE("multiple validated gold answers take the best score per metric") {
  std::vector<Strs> golds = {{"14"}, {"touchdown"}};
  auto [em1, f11] = em_f1_multi({"touchdown"}, golds);
  REQUIRE(em1 == 1.0);
  REQUIRE(f11 == 1.0);

  auto [em2, f12] = em_f1_multi({"14.0"}, golds);
  REQUIRE(em2 == 1.0);
  REQUIRE(f12 == 1.0);

  auto [em3, f13] = em_f1_multi({"nothing here"}, golds);
  REQUIRE(em3 == 0.0);
  REQUIRE(f13 == 0.0);

  // EM can come from one gold and F1 from another independently.
  std::vector<Strs> golds2 = {{"alpha beta"}, {"alpha"}};
  auto [em4, f14] = em_f1_multi({"alpha"}, golds2);
  REQUIRE(em4 == 1.0);
  REQUIRE(f14 == 1.0);
}

TEST_CASE("answer buckets split numbers into count and number") {
  REQUIRE(bucket_of(number_spec(0.0)) == "count");
  REQUIRE(bucket_of(number_spec(3.0)) == "count");
  REQUIRE(bucket_of(number_spec(9.0)) == "count");
  REQUIRE(bucket_of(number_spec(10.0)) == "number");
  REQUIRE(bucket_of(number_spec(3.5)) == "number");
  REQUIRE(bucket_of(number_spec(-2.0)) == "number");
  REQUIRE(bucket_of(number_spec(93.1)) == "number");
  REQUIRE(bucket_of(span_spec({"New York"})) == "span");
  REQUIRE(bucket_of(date_spec("6", "March", "1944")) == "date");
}

TEST_CASE("gold reference strings render each answer kind") {
  REQUIRE(gold_answer_strings(number_spec(93.1)) == Strs{"93.1"});
  REQUIRE(gold_answer_strings(number_spec(30.0)) == Strs{"30"});
  REQUIRE(gold_answer_strings(span_spec({"New York", "Boston"})) ==
          Strs{"New York", "Boston"});
  REQUIRE(gold_answer_strings(date_spec("6", "March", "1944")) == Strs{"6 March 1944"});
  REQUIRE(gold_answer_strings(date_spec("", "March", "1944")) == Strs{"March 1944"});
  REQUIRE(gold_answer_strings(date_spec("", "", "1944")) == Strs{"1944"});
}

TEST_CASE("report statistics scale to percentages") {
  BucketStats b;
  b.count = 4;
  b.em_sum = 3.0;
  b.f1_sum = 3.5;
  REQUIRE(b.em() == Approx(75.0));
  REQUIRE(b.f1() == Approx(87.5));
  REQUIRE(BucketStats{}.em() == 0.0);

  DetectorStats d;
  d.tp = 3;
  d.fp = 1;
  d.fn = 2;
  REQUIRE(d.precision() == Approx(75.0));
  REQUIRE(d.recall() == Approx(60.0));
  REQUIRE(d.f1() == Approx(2.0 * 75.0 * 60.0 / 135.0));
  REQUIRE(DetectorStats{}.f1() == 0.0);

  EvalReport r;
  r.total = 2;
  r.em_sum = 1.5;
  r.f1_sum = 2.0;
  REQUIRE(r.em() == Approx(75.0));
  REQUIRE(r.f1() == Approx(100.0));
  REQUIRE(EvalReport{}.em() == 0.0);
}
