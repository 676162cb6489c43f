// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// Expression enumeration against an exhaustive oracle, evidence labeling
// rules, weak answer annotations, and the keep-ratio statistic.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "evidr/supervision.hpp"
#include "evidr/synth.hpp"

using namespace evidr;

namespace {

AnswerSpec number_gold(double v, const std::string& surface) {
  AnswerSpec g;
  g.kind = AnswerKind::Number;
  g.number = v;
  g.number_surface = surface;
  return g;
}

AnswerSpec spans_gold(std::vector<std::string> spans) {
  AnswerSpec g;
  g.kind = AnswerKind::Spans;
  g.spans = std::move(spans);
  return g;
}

using SignVec = std::vector<std::int8_t>;

std::set<SignVec> assignment_set(const ExpressionSet& e) {
  std::set<SignVec> s;
  for (const auto& a : e.assignments) s.insert(a.signs);
  return s;
}

/// Every sign vector over {-1,0,+1}^n with 1..max_terms nonzero entries whose
/// signed sum hits the target, found by exhaustive base-3 counting.
std::set<SignVec> brute_force(const std::vector<double>& numbers, double target, int max_terms) {
  const int n = static_cast<int>(numbers.size());
  std::set<SignVec> out;
  long total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  for (long code = 0; code < total; ++code) {
    SignVec signs(static_cast<std::size_t>(n), 0);
    long c = code;
    int used = 0;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      int digit = static_cast<int>(c % 3);
      c /= 3;
      signs[static_cast<std::size_t>(i)] = static_cast<std::int8_t>(digit == 2 ? -1 : digit);
      if (digit != 0) {
        ++used;
        sum += signs[static_cast<std::size_t>(i)] * numbers[static_cast<std::size_t>(i)];
      }
    }
    if (used >= 1 && used <= max_terms && std::abs(sum - target) <= kExprTolerance)
      out.insert(std::move(signs));
  }
  return out;
}

}  // namespace

TEST_CASE("the two-percent difference yields exactly one expression") {
  std::vector<double> numbers = {93.9, 0.8};
  auto e = enumerate_expressions(numbers, 93.9 - 0.8);
  REQUIRE(e.assignments.size() == 1);
  CHECK(e.assignments[0].signs == SignVec{1, -1});
  CHECK_FALSE(e.truncated);

  CHECK(assignment_set(enumerate_expressions(numbers, 94.7)) ==
        std::set<SignVec>{SignVec{1, 1}});
  CHECK(assignment_set(enumerate_expressions(numbers, -93.1)) ==
        std::set<SignVec>{SignVec{-1, 1}});
  CHECK(enumerate_expressions(numbers, 12.34).assignments.empty());
}

TEST_CASE("enumeration matches an exhaustive oracle") {
  std::mt19937_64 rng(271828);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 2 + static_cast<int>(uniform_below(rng, 7));  // up to 8 numbers
    std::vector<double> numbers;
    for (int i = 0; i < n; ++i)
      numbers.push_back(static_cast<double>(uniform_below(rng, 12)) / 2.0);  // repeats likely
    int max_terms = 1 + static_cast<int>(uniform_below(rng, 4));

    // Half the trials aim at a reachable sum, half at an arbitrary value.
    double target;
    if (trial % 2 == 0) {
      double sum = 0.0;
      for (int i = 0; i < std::min(n, max_terms); ++i)
        sum += (uniform_below(rng, 2) ? 1 : -1) * numbers[static_cast<std::size_t>(i)];
      target = sum;
    } else {
      target = static_cast<double>(uniform_below(rng, 40)) / 4.0;
    }

    auto got = enumerate_expressions(numbers, target, max_terms, 1 << 20);
    REQUIRE_FALSE(got.truncated);
    CHECK(assignment_set(got) == brute_force(numbers, target, max_terms));
    CHECK(got.assignments.size() == brute_force(numbers, target, max_terms).size());
  }
}

TEST_CASE("the expression cap truncates and reports it") {
  // 0 appears eight times; target 0 with one term has eight solutions of
  // each sign plus every pair-cancellation, far more than a cap of 5.
  std::vector<double> numbers(8, 0.0);
  auto e = enumerate_expressions(numbers, 0.0, 3, 5);
  CHECK(e.assignments.size() == 5);
  CHECK(e.truncated);
}

TEST_CASE("combined numbers put question mentions first") {
  Document d = make_document("p", "There were 12 cats and 34 dogs.");
  QAInstance qa = make_instance("q", "How many more than 7 pets?", number_gold(5, "5"));
  auto v = combined_number_values(d, qa);
  REQUIRE(v == std::vector<double>{7.0, 12.0, 34.0});
}

TEST_CASE("evidence labels for a census difference question") {
  Document d = make_document(
      "p",
      "Carlton is a town in Missouri. As of the census of 2000, there were 4831 people. "
      "The racial makeup of the city was 93.9% White and 0.8% African American.");
  QAInstance qa = make_instance(
      "q", "How many more percent of people were White than African American?",
      number_gold(93.9 - 0.8, "93.1"));

  EvidenceLabels l = label_evidence(d, qa);
  REQUIRE(l.sentence_labels.size() == 3);

  // Expressions {+93.9, -0.8} mark both percent clauses and their sentence;
  // topic entities White / African American land in the same sentence.
  CHECK(l.sentence_labels[2] == 1);
  int marked_clauses = 0;
  for (std::size_t c = 0; c < l.clause_labels.size(); ++c)
    if (l.clause_labels[c]) {
      ++marked_clauses;
      CHECK(d.clauses[c].parent_sentence == 2);
    }
  CHECK(marked_clauses == 2);
  // The 2000/4831 sentence carries no gold string, entity, or used number.
  CHECK(l.sentence_labels[1] == 0);
}

TEST_CASE("labeled clauses imply their parent sentence on generated data") {
  auto [train, dev] = synthesize_splits(5, 60, 0);
  int labeled_instances = 0;
  for (const auto& entry : train.entries) {
    for (const auto& qa : entry.instances) {
      EvidenceLabels l = label_evidence(entry.doc, qa);
      for (const Fragment& c : entry.doc.clauses)
        if (l.clause_labels[static_cast<std::size_t>(c.frag_id)])
          REQUIRE(l.sentence_labels[static_cast<std::size_t>(c.parent_sentence)] == 1);
      if (l.any()) ++labeled_instances;
    }
  }
  // Count questions can lack both matches and expressions; all other forms
  // always pick up labels from gold strings, entities, or expressions.
  CHECK(labeled_instances >= 54);
}

TEST_CASE("topic entities are maximal capitalized non-stopword runs") {
  auto toks = tokenize("How many yards did Tom Brady throw for in New England?");
  auto ents = topic_entities(toks);
  REQUIRE(ents.size() == 2);
  CHECK(ents[0].size() == 2);
  CHECK(ents[0][0].surface == "Tom");
  CHECK(ents[0][1].surface == "Brady");
  CHECK(ents[1].size() == 2);
  CHECK(ents[1][0].surface == "New");
  CHECK(ents[1][1].surface == "England");
  // Sentence-initial "How" and "Which" are stopwords, never entities.
  CHECK(topic_entities(tokenize("Which team won?")).size() == 1);
}

TEST_CASE("span annotations record every occurrence on both sides") {
  Document d = make_document("p", "The Bears beat the Bears reserves.");
  QAInstance qa = make_instance("q", "Did the Bears win?", spans_gold({"Bears"}));
  auto ann = build_annotations(d, qa);
  REQUIRE(ann.trainable);
  CHECK(ann.has(AnswerType::PassageSpan));
  CHECK(ann.has(AnswerType::QuestionSpan));
  REQUIRE(ann.passage_spans.size() == 2);
  CHECK(ann.passage_spans[0] == std::pair<int, int>{1, 1});
  CHECK(ann.passage_spans[1] == std::pair<int, int>{4, 4});
  REQUIRE(ann.question_spans.size() == 1);
  CHECK(ann.question_spans[0] == std::pair<int, int>{2, 2});
}

TEST_CASE("percent surfaces match their bare gold string") {
  Document d = make_document("p", "The makeup was 93.9% White.");
  QAInstance qa = make_instance("q", "What percent was White?", number_gold(93.9, "93.9"));
  auto ann = build_annotations(d, qa);
  CHECK(ann.has(AnswerType::PassageSpan));
  REQUIRE(ann.passage_spans.size() == 1);
  CHECK(d.tokens[static_cast<std::size_t>(ann.passage_spans[0].first)].surface == "93.9%");
}

TEST_CASE("integer golds in range gain a count label") {
  Document d = make_document("p", "Three scores of 12, 30, and 18 points were kicked.");
  QAInstance qa = make_instance("q", "How many field goals?", number_gold(3, "3"));
  auto ann = build_annotations(d, qa);
  CHECK(ann.has(AnswerType::Count));
  REQUIRE(ann.count_label.has_value());
  CHECK(*ann.count_label == 3);
  // "Three" is a number mention, so a one-term expression also fires.
  CHECK(ann.has(AnswerType::Arithmetic));

  QAInstance qh = make_instance("q2", "How many halves?", number_gold(7.5, "7.5"));
  auto ann2 = build_annotations(d, qh);
  CHECK_FALSE(ann2.has(AnswerType::Count));

  QAInstance qt = make_instance("q3", "What was the total?", number_gold(60, "60"));
  auto ann3 = build_annotations(d, qt);
  CHECK_FALSE(ann3.has(AnswerType::Count));  // 60 is outside 0..9
  CHECK(ann3.has(AnswerType::Arithmetic));   // 12 + 30 + 18
}

TEST_CASE("multi-span golds become BIO tags when fully present") {
  Document d = make_document("p", "Smith threw to Jones and later to Brown.");
  QAInstance qa =
      make_instance("q", "Who caught passes?", spans_gold({"Jones", "Brown"}));
  auto ann = build_annotations(d, qa);
  REQUIRE(ann.trainable);
  CHECK(ann.feasible == std::vector<AnswerType>{AnswerType::MultiSpan});
  REQUIRE(ann.bio_tags.size() == d.tokens.size());
  CHECK(ann.bio_tags[3] == kBioB);  // Jones
  CHECK(ann.bio_tags[7] == kBioB);  // Brown
  int b_count = 0;
  for (auto t : ann.bio_tags) b_count += t == kBioB;
  CHECK(b_count == 2);

  QAInstance qm = make_instance("q2", "Who caught passes?", spans_gold({"Jones", "Garcia"}));
  CHECK_FALSE(build_annotations(d, qm).trainable);
}

TEST_CASE("overlapping BIO occurrences keep the first span") {
  Document d = make_document("p", "New York New York is a song.");
  QAInstance qa = make_instance("q", "Name two things.",
                                spans_gold({"New York New York", "York New"}));
  auto ann = build_annotations(d, qa);
  REQUIRE(ann.trainable);
  // "New York New York" tags tokens 0..3; both "York New" occurrences
  // overlap it and are skipped.
  REQUIRE(ann.bio_tags.size() == d.tokens.size());
  CHECK(ann.bio_tags[0] == kBioB);
  CHECK(ann.bio_tags[1] == kBioI);
  CHECK(ann.bio_tags[2] == kBioI);
  CHECK(ann.bio_tags[3] == kBioI);
}

TEST_CASE("date golds down-convert to span supervision") {
  Document d = make_document("p", "War broke out on 28 June 1914 in Sarajevo.");
  DateAnswer full{"28", "June", "1914"};
  AnswerSpec g;
  g.kind = AnswerKind::Date;
  g.date = full;
  QAInstance qa = make_instance("q", "When did war break out?", g);
  auto ann = build_annotations(d, qa);
  CHECK(ann.feasible == std::vector<AnswerType>{AnswerType::MultiSpan});

  AnswerSpec year_only;
  year_only.kind = AnswerKind::Date;
  year_only.date = DateAnswer{"", "", "1914"};
  auto ann2 = build_annotations(d, make_instance("q2", "When?", year_only));
  CHECK(ann2.feasible == std::vector<AnswerType>{AnswerType::PassageSpan});

  // A date with a missing component is neither a clean single span nor a
  // complete multi-span target, so it trains the evidence loss only.
  AnswerSpec partial;
  partial.kind = AnswerKind::Date;
  partial.date = DateAnswer{"5", "June", "1914"};  // "5" not in passage
  auto ann3 = build_annotations(d, make_instance("q3", "When?", partial));
  CHECK_FALSE(ann3.trainable);
}

TEST_CASE("keep ratio averages per-instance percentages") {
  EvidenceLabels half;
  half.sentence_labels = {1, 0, 1, 0};
  half.clause_labels = {1, 0};
  EvidenceLabels full;
  full.sentence_labels = {1};
  full.clause_labels = {1, 1, 1};
  auto [akr_s, akr_c] = compute_akr({half, full});
  CHECK(akr_s == Catch::Approx(75.0));   // (50 + 100) / 2
  CHECK(akr_c == Catch::Approx(75.0));   // (50 + 100) / 2

  EvidenceLabels no_clauses;
  no_clauses.sentence_labels = {0, 1};
  auto [s2, c2] = compute_akr({no_clauses, full});
  CHECK(s2 == Catch::Approx(75.0));      // (50 + 100) / 2
  CHECK(c2 == Catch::Approx(100.0));     // the clause-free instance is skipped
  CHECK(compute_akr({}).first == 0.0);
}
