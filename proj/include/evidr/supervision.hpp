// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// Distant supervision: signed-expression enumeration against the gold
// number, heuristic evidence labels over sentence/clause fragments, weak
// answer annotations for the marginal-likelihood loss, and the aggregate
// keep-ratio statistic.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "evidr/common.hpp"
#include "evidr/corpus.hpp"

namespace evidr {

inline constexpr double kExprTolerance = 1e-5;
inline constexpr int kExpressionCap = 64;

/// Answer head identities; the order fixes the type-classifier columns.
enum class AnswerType : int {
  QuestionSpan = 0,
  PassageSpan = 1,
  Arithmetic = 2,
  Count = 3,
  MultiSpan = 4,
};
inline constexpr int kNumAnswerTypes = 5;

inline const char* answer_type_name(AnswerType t) {
  switch (t) {
    case AnswerType::QuestionSpan: return "question_span";
    case AnswerType::PassageSpan: return "passage_span";
    case AnswerType::Arithmetic: return "arithmetic";
    case AnswerType::Count: return "count";
    case AnswerType::MultiSpan: return "multi_span";
  }
  return "?";
}

/// One sign per number mention (question numbers first, then passage), in
/// {+1, -1, 0}; between 1 and max_terms entries are nonzero.
struct SignAssignment {
  std::vector<std::int8_t> signs;
};

struct ExpressionSet {
  std::vector<SignAssignment> assignments;
  bool truncated = false;  // true when the cap cut off further solutions
};

/// All sign assignments with 1..max_terms nonzero entries whose signed sum
/// hits the target within 1e-5. Emission order is depth-first over index
/// tuples, which is lexicographic with prefixes first; within one tuple plus
/// precedes minus. At most kExpressionCap assignments are kept.
inline ExpressionSet enumerate_expressions(const std::vector<double>& numbers, double target,
                                           int max_terms = 3, int cap = kExpressionCap) {
  ExpressionSet out;
  const int n = static_cast<int>(numbers.size());
  std::vector<std::int8_t> signs(static_cast<std::size_t>(n), 0);
  // DFS state: next index to consider, count of nonzero signs, running sum.
  auto dfs = [&](auto&& self, int next, int used, double sum) -> bool {
    if (used >= 1 && std::abs(sum - target) <= kExprTolerance) {
      if (static_cast<int>(out.assignments.size()) >= cap) {
        out.truncated = true;
        return false;
      }
      out.assignments.push_back(SignAssignment{signs});
    }
    if (used == max_terms) return true;
    for (int i = next; i < n; ++i) {
      signs[i] = 1;
      if (!self(self, i + 1, used + 1, sum + numbers[i])) return false;
      signs[i] = -1;
      if (!self(self, i + 1, used + 1, sum - numbers[i])) return false;
      signs[i] = 0;
    }
    return true;
  };
  if (max_terms >= 1) dfs(dfs, 0, 0, 0.0);
  return out;
}

inline double evaluate_assignment(const SignAssignment& a, const std::vector<double>& numbers) {
  double s = 0.0;
  for (std::size_t i = 0; i < numbers.size(); ++i) s += a.signs[i] * numbers[i];
  return s;
}

/// Canonical number list shared by the sign head, count attention, and graph
/// number nodes: question mentions by token index, then passage mentions.
inline std::vector<double> combined_number_values(const Document& doc, const QAInstance& qa) {
  std::vector<double> v;
  v.reserve(qa.question_numbers.size() + doc.numbers.size());
  for (const auto& m : qa.question_numbers) v.push_back(m.value);
  for (const auto& m : doc.numbers) v.push_back(m.value);
  return v;
}

// ---------------------------------------------------------------------------
// Token sequence matching
// ---------------------------------------------------------------------------

namespace detail {

inline std::string match_key(std::string_view surface) {
  std::string s = to_lower(surface);
  if (!s.empty() && s.back() == '%') s.pop_back();
  return s;
}

}  // namespace detail

/// Case-insensitive contiguous token-sequence matches; a trailing percent
/// sign on either side is ignored so "93.9" matches the token "93.9%".
/// Returned spans are inclusive [start, end] token index pairs.
inline std::vector<std::pair<int, int>> find_occurrences(const std::vector<Token>& tokens,
                                                         const std::vector<Token>& pattern) {
  std::vector<std::pair<int, int>> out;
  if (pattern.empty() || pattern.size() > tokens.size()) return out;
  const std::size_t m = pattern.size();
  for (std::size_t i = 0; i + m <= tokens.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < m; ++j) {
      if (detail::match_key(tokens[i + j].surface) != detail::match_key(pattern[j].surface)) {
        ok = false;
        break;
      }
    }
    if (ok) out.emplace_back(static_cast<int>(i), static_cast<int>(i + m - 1));
  }
  return out;
}

inline std::vector<std::pair<int, int>> find_occurrences(const std::vector<Token>& tokens,
                                                         const std::string& text) {
  return find_occurrences(tokens, tokenize(text));
}

// ---------------------------------------------------------------------------
// Topic entities
// ---------------------------------------------------------------------------

inline bool is_stopword(std::string_view tok) {
  static const std::set<std::string, std::less<>> words = {
      "a",    "an",    "the",   "of",    "in",   "on",    "at",    "to",    "for",
      "and",  "but",   "or",    "how",   "what", "which", "who",   "whom",  "whose",
      "when", "where", "why",   "is",    "are",  "was",   "were",  "did",   "do",
      "does", "many",  "much",  "more",  "most", "fewer", "less",  "least", "between",
      "during", "from", "by",   "with",  "as",   "than",  "that",  "this",  "these",
      "those", "there", "percent", "not", "had",  "have",  "has"};
  return words.count(to_lower(tok)) > 0;
}

/// Maximal runs of consecutive capitalized, non-stopword question tokens.
inline std::vector<std::vector<Token>> topic_entities(const std::vector<Token>& question) {
  std::vector<std::vector<Token>> runs;
  std::vector<Token> cur;
  auto flush = [&] {
    if (!cur.empty()) runs.push_back(cur);
    cur.clear();
  };
  for (const Token& t : question) {
    bool cap = !t.surface.empty() && is_ascii_upper(t.surface[0]);
    if (cap && !is_stopword(t.surface))
      cur.push_back(t);
    else
      flush();
  }
  flush();
  return runs;
}

// ---------------------------------------------------------------------------
// Evidence labels
// ---------------------------------------------------------------------------

struct EvidenceLabels {
  std::vector<std::uint8_t> sentence_labels;
  std::vector<std::uint8_t> clause_labels;

  bool any() const {
    for (auto v : sentence_labels)
      if (v) return true;
    for (auto v : clause_labels)
      if (v) return true;
    return false;
  }
};

namespace detail {

inline bool fragment_contains_span(const Fragment& f, const std::pair<int, int>& span) {
  return span.first >= f.start && span.second < f.end;
}

/// Gold strings whose presence marks a fragment as evidence.
inline std::vector<std::string> answer_match_strings(const AnswerSpec& gold) {
  std::vector<std::string> out;
  switch (gold.kind) {
    case AnswerKind::Number:
      if (gold.number_surface) out.push_back(*gold.number_surface);
      if (gold.number) {
        std::string r = render_number(*gold.number);
        if (!gold.number_surface || r != *gold.number_surface) out.push_back(r);
      }
      break;
    case AnswerKind::Spans:
      out = *gold.spans;
      break;
    case AnswerKind::Date:
      if (!gold.date->day.empty()) out.push_back(gold.date->day);
      if (!gold.date->month.empty()) out.push_back(gold.date->month);
      if (!gold.date->year.empty()) out.push_back(gold.date->year);
      break;
  }
  return out;
}

}  // namespace detail

/// One-shot heuristic labeling. A fragment is evidence when it contains a
/// gold answer string, a question topic entity, or a number used by any
/// expression that reaches a gold number answer. Sentence labels absorb
/// their clauses' labels.
inline EvidenceLabels label_evidence(const Document& doc, const QAInstance& qa) {
  EvidenceLabels out;
  out.sentence_labels.assign(doc.sentences.size(), 0);
  out.clause_labels.assign(doc.clauses.size(), 0);

  std::vector<std::pair<int, int>> match_spans;
  for (const std::string& s : detail::answer_match_strings(qa.gold))
    for (auto& occ : find_occurrences(doc.tokens, s)) match_spans.push_back(occ);
  for (const auto& entity : topic_entities(qa.question_tokens))
    for (auto& occ : find_occurrences(doc.tokens, entity)) match_spans.push_back(occ);

  std::vector<int> evidence_tokens;  // single-token anchors from the number rule
  if (qa.gold.kind == AnswerKind::Number && qa.gold.number) {
    auto values = combined_number_values(doc, qa);
    auto exprs = enumerate_expressions(values, *qa.gold.number);
    const std::size_t q_count = qa.question_numbers.size();
    std::vector<char> used(values.size(), 0);
    for (const auto& a : exprs.assignments)
      for (std::size_t i = 0; i < values.size(); ++i)
        if (a.signs[i] != 0) used[i] = 1;
    for (std::size_t i = q_count; i < values.size(); ++i)
      if (used[i]) evidence_tokens.push_back(doc.numbers[i - q_count].token_index);
  }

  auto mark = [&](std::vector<std::uint8_t>& labels, const std::vector<Fragment>& frags) {
    for (const Fragment& f : frags) {
      bool hit = false;
      for (const auto& span : match_spans)
        if (detail::fragment_contains_span(f, span)) {
          hit = true;
          break;
        }
      if (!hit)
        for (int tok : evidence_tokens)
          if (tok >= f.start && tok < f.end) {
            hit = true;
            break;
          }
      if (hit) labels[f.frag_id] = 1;
    }
  };
  mark(out.sentence_labels, doc.sentences);
  mark(out.clause_labels, doc.clauses);

  // Monotonicity: a labeled clause implies its parent sentence.
  for (const Fragment& c : doc.clauses)
    if (out.clause_labels[c.frag_id]) out.sentence_labels[c.parent_sentence] = 1;
  return out;
}

// ---------------------------------------------------------------------------
// Answer annotations
// ---------------------------------------------------------------------------

struct AnswerAnnotations {
  bool trainable = false;
  std::vector<AnswerType> feasible;                   // sorted by enum value
  std::vector<std::pair<int, int>> passage_spans;     // inclusive token pairs
  std::vector<std::pair<int, int>> question_spans;
  ExpressionSet expressions;
  std::optional<int> count_label;
  std::vector<std::uint8_t> bio_tags;  // per passage token, 0=O 1=B 2=I; MultiSpan only

  bool has(AnswerType t) const {
    return std::find(feasible.begin(), feasible.end(), t) != feasible.end();
  }
};

inline constexpr std::uint8_t kBioO = 0, kBioB = 1, kBioI = 2;

namespace detail {

/// B/I marks for every occurrence span; overlapping later occurrences are
/// skipped so tags stay well formed.
inline std::vector<std::uint8_t> make_bio_tags(int n_tokens,
                                               std::vector<std::pair<int, int>> spans) {
  std::vector<std::uint8_t> tags(static_cast<std::size_t>(n_tokens), kBioO);
  std::sort(spans.begin(), spans.end());
  for (const auto& [s, e] : spans) {
    bool free = true;
    for (int i = s; i <= e; ++i)
      if (tags[i] != kBioO) {
        free = false;
        break;
      }
    if (!free) continue;
    tags[s] = kBioB;
    for (int i = s + 1; i <= e; ++i) tags[i] = kBioI;
  }
  return tags;
}

}  // namespace detail

/// Weak annotations enumerating every way the gold answer can be produced.
/// Span answers yield all token-match positions per side; two or more gold
/// spans switch to BIO supervision; number answers yield expressions, a
/// count label in [0,9], and verbatim-surface span positions; date answers
/// are down-converted to span targets over their component strings.
inline AnswerAnnotations build_annotations(const Document& doc, const QAInstance& qa,
                                           int max_terms = 3, int cap = kExpressionCap) {
  AnswerAnnotations ann;
  auto add = [&](AnswerType t) {
    if (!ann.has(t)) ann.feasible.push_back(t);
  };

  switch (qa.gold.kind) {
    case AnswerKind::Spans: {
      const auto& spans = *qa.gold.spans;
      bool all_in_passage = true;
      std::vector<std::pair<int, int>> passage_occ;
      for (const std::string& s : spans) {
        auto occ = find_occurrences(doc.tokens, s);
        if (occ.empty()) all_in_passage = false;
        for (auto& o : occ) passage_occ.push_back(o);
      }
      if (spans.size() == 1) {
        if (!passage_occ.empty()) {
          add(AnswerType::PassageSpan);
          ann.passage_spans = passage_occ;
        }
        auto qocc = find_occurrences(qa.question_tokens, spans[0]);
        if (!qocc.empty()) {
          add(AnswerType::QuestionSpan);
          ann.question_spans = qocc;
        }
      } else if (spans.size() >= 2 && all_in_passage) {
        add(AnswerType::MultiSpan);
        ann.bio_tags = detail::make_bio_tags(static_cast<int>(doc.tokens.size()), passage_occ);
      }
      break;
    }
    case AnswerKind::Number: {
      auto values = combined_number_values(doc, qa);
      ann.expressions = enumerate_expressions(values, *qa.gold.number, max_terms, cap);
      if (!ann.expressions.assignments.empty()) add(AnswerType::Arithmetic);
      double v = *qa.gold.number;
      double r = std::round(v);
      if (std::abs(v - r) < 1e-9 && r >= 0 && r <= 9) {
        add(AnswerType::Count);
        ann.count_label = static_cast<int>(r);
      }
      if (qa.gold.number_surface) {
        auto occ = find_occurrences(doc.tokens, *qa.gold.number_surface);
        if (!occ.empty()) {
          add(AnswerType::PassageSpan);
          ann.passage_spans = occ;
        }
      }
      break;
    }
    case AnswerKind::Date: {
      std::vector<std::string> parts;
      for (const std::string& p : {qa.gold.date->day, qa.gold.date->month, qa.gold.date->year})
        if (!p.empty()) parts.push_back(p);
      std::vector<std::string> present;
      std::vector<std::pair<int, int>> occs;
      for (const std::string& p : parts) {
        auto occ = find_occurrences(doc.tokens, p);
        if (!occ.empty()) {
          present.push_back(p);
          for (auto& o : occ) occs.push_back(o);
        }
      }
      if (present.size() == 1) {
        add(AnswerType::PassageSpan);
        ann.passage_spans = occs;
      } else if (present.size() >= 2 && present.size() == parts.size()) {
        add(AnswerType::MultiSpan);
        ann.bio_tags = detail::make_bio_tags(static_cast<int>(doc.tokens.size()), occs);
      }
      break;
    }
  }
  std::sort(ann.feasible.begin(), ann.feasible.end());
  ann.trainable = !ann.feasible.empty();
  return ann;
}

// ---------------------------------------------------------------------------
// Average keep ratio
// ---------------------------------------------------------------------------

/// Mean over instances of labeled/total fragments, in percent, per level.
/// Instances with zero fragments at a level are skipped for that level.
inline std::pair<double, double> compute_akr(const std::vector<EvidenceLabels>& labels) {
  double sum_s = 0.0, sum_c = 0.0;
  int n_s = 0, n_c = 0;
  for (const auto& l : labels) {
    if (!l.sentence_labels.empty()) {
      int kept = 0;
      for (auto v : l.sentence_labels) kept += v;
      sum_s += 100.0 * kept / static_cast<double>(l.sentence_labels.size());
      ++n_s;
    }
    if (!l.clause_labels.empty()) {
      int kept = 0;
      for (auto v : l.clause_labels) kept += v;
      sum_c += 100.0 * kept / static_cast<double>(l.clause_labels.size());
      ++n_c;
    }
  }
  return {n_s ? sum_s / n_s : 0.0, n_c ? sum_c / n_c : 0.0};
}

}  // namespace evidr
