// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// Answer normalization and EM/F1 scoring per the DROP convention, plus the
// report containers for per-type and detector metrics. Everything here is
// pure string/number work; running a model lives with the model driver.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "evidr/common.hpp"
#include "evidr/supervision.hpp"

namespace evidr {

namespace detail {

inline bool is_ascii_punct(char c) {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
         (c >= '{' && c <= '~');
}

}  // namespace detail

/// Lowercase, strip punctuation from non-numeric tokens, drop the articles
/// {a, an, the}, render numeric tokens canonically (trailing zeros trimmed),
/// and split on whitespace. Returns the token bag in text order.
inline std::vector<std::string> normalize_answer(std::string_view s) {
  std::vector<std::string> bag;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    std::string tok = to_lower(word);
    word.clear();
    // Numeric tokens keep their punctuation (commas, decimal point) and are
    // canonicalized by value; everything else loses punctuation.
    if (auto v = token_number_value(tok)) {
      bag.push_back(render_number(*v));
      return;
    }
    std::string stripped;
    for (char c : tok)
      if (!detail::is_ascii_punct(c)) stripped += c;
    if (stripped.empty()) return;
    if (auto v = token_number_value(stripped)) {
      bag.push_back(render_number(*v));
      return;
    }
    if (stripped == "a" || stripped == "an" || stripped == "the") return;
    bag.push_back(std::move(stripped));
  };
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r')
      flush();
    else
      word += c;
  }
  flush();
  return bag;
}

inline std::string normalized_string(std::string_view s) {
  return join(normalize_answer(s), " ");
}

namespace detail {

inline std::multiset<std::string> to_multiset(const std::vector<std::string>& v) {
  return {v.begin(), v.end()};
}

inline std::set<std::string> bag_numbers(const std::vector<std::string>& bag) {
  std::set<std::string> out;
  for (const std::string& t : bag)
    if (parse_number_token(t)) out.insert(t);
  return out;
}

inline double bag_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() || gold.empty()) return 0.0;
  auto pm = to_multiset(pred);
  auto gm = to_multiset(gold);
  std::size_t overlap = 0;
  for (const std::string& t : pm)
    if (auto it = gm.find(t); it != gm.end()) {
      gm.erase(it);
      ++overlap;
    }
  if (overlap == 0) return 0.0;
  double p = static_cast<double>(overlap) / pred.size();
  double r = static_cast<double>(overlap) / gold.size();
  return 2.0 * p * r / (p + r);
}

/// Numbers-must-match gate: when the gold bag contains numbers, a candidate
/// pairing scores 0 unless it shares at least one of them.
inline bool numbers_match(const std::vector<std::string>& pred,
                          const std::vector<std::string>& gold) {
  auto gn = bag_numbers(gold);
  if (gn.empty()) return true;
  for (const std::string& t : bag_numbers(pred))
    if (gn.count(t)) return true;
  return false;
}

/// Exact optimal one-to-one alignment over bag F1 scores, by bitmask DP over
/// the prediction side. Answer sets are tiny, so this stays cheap.
inline double align_bags(const std::vector<std::vector<std::string>>& pred,
                         const std::vector<std::vector<std::string>>& gold) {
  const std::size_t G = gold.size(), P = pred.size();
  if (G == 0 && P == 0) return 0.0;  // nothing to align; avoid 0/0 below
  std::vector<std::vector<double>> score(G, std::vector<double>(P, 0.0));
  for (std::size_t i = 0; i < G; ++i)
    for (std::size_t j = 0; j < P; ++j)
      if (numbers_match(pred[j], gold[i])) score[i][j] = bag_f1(pred[j], gold[i]);
  if (P > 20) {
    // Degenerate guard; never hit by real answer sets.
    double s = 0.0;
    for (std::size_t i = 0; i < G && i < P; ++i) s += score[i][i];
    return s / std::max(G, P);
  }
  std::vector<double> dp(static_cast<std::size_t>(1) << P, -1.0);
  dp[0] = 0.0;
  double best = 0.0;
  for (std::size_t i = 0; i < G; ++i) {
    std::vector<double> next(dp.size(), -1.0);
    for (std::size_t mask = 0; mask < dp.size(); ++mask) {
      if (dp[mask] < 0) continue;
      next[mask] = std::max(next[mask], dp[mask]);  // gold i left unmatched
      for (std::size_t j = 0; j < P; ++j) {
        if (mask & (1u << j)) continue;
        std::size_t m2 = mask | (1u << j);
        double v = dp[mask] + score[i][j];
        if (v > next[m2]) next[m2] = v;
      }
    }
    dp = std::move(next);
  }
  for (double v : dp) best = std::max(best, v);
  return best / static_cast<double>(std::max(G, P));
}

}  // namespace detail

/// EM is multiset equality of normalized answer strings; F1 is the optimal
/// alignment of token bags averaged over max(#gold, #pred).
inline std::pair<double, double> em_f1(const std::vector<std::string>& predicted,
                                       const std::vector<std::string>& gold) {
  std::vector<std::string> pred_norm, gold_norm;
  std::vector<std::vector<std::string>> pred_bags, gold_bags;
  for (const std::string& s : predicted) {
    pred_bags.push_back(normalize_answer(s));
    pred_norm.push_back(join(pred_bags.back(), " "));
  }
  for (const std::string& s : gold) {
    gold_bags.push_back(normalize_answer(s));
    gold_norm.push_back(join(gold_bags.back(), " "));
  }
  std::sort(pred_norm.begin(), pred_norm.end());
  std::sort(gold_norm.begin(), gold_norm.end());
  double em = (!gold_norm.empty() && pred_norm == gold_norm) ? 1.0 : 0.0;
  double f1 = detail::align_bags(pred_bags, gold_bags);
  return {em, f1};
}

/// Multiple validated gold answers take the best score per metric.
inline std::pair<double, double> em_f1_multi(const std::vector<std::string>& predicted,
                                             const std::vector<std::vector<std::string>>& golds) {
  double em = 0.0, f1 = 0.0;
  for (const auto& g : golds) {
    auto [e, f] = em_f1(predicted, g);
    em = std::max(em, e);
    f1 = std::max(f1, f);
  }
  return {em, f1};
}

// ---------------------------------------------------------------------------
// Report containers
// ---------------------------------------------------------------------------

struct BucketStats {
  int count = 0;
  double em_sum = 0.0, f1_sum = 0.0;
  double em() const { return count ? 100.0 * em_sum / count : 0.0; }
  double f1() const { return count ? 100.0 * f1_sum / count : 0.0; }
};

struct DetectorStats {
  long tp = 0, fp = 0, fn = 0;
  double precision() const { return tp + fp ? 100.0 * tp / (tp + fp) : 0.0; }
  double recall() const { return tp + fn ? 100.0 * tp / (tp + fn) : 0.0; }
  double f1() const {
    double p = precision(), r = recall();
    return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
  }
};

struct InstanceEval {
  std::string query_id;
  AnswerType predicted_type = AnswerType::PassageSpan;
  std::vector<std::string> answers;
  std::vector<std::string> gold;
  std::string bucket;
  double em = 0.0, f1 = 0.0;
};

struct EvalReport {
  int total = 0;
  double em_sum = 0.0, f1_sum = 0.0;
  std::map<std::string, BucketStats> per_type;  // number, date, span, count
  DetectorStats det_sentence, det_clause;
  double akr_sentence = 0.0, akr_clause = 0.0;
  std::vector<InstanceEval> records;

  double em() const { return total ? 100.0 * em_sum / total : 0.0; }
  double f1() const { return total ? 100.0 * f1_sum / total : 0.0; }
};

/// Bucket key by gold kind; Count is carved out of Number so the four
/// buckets stay disjoint and their counts sum to the total.
inline std::string bucket_of(const AnswerSpec& gold) {
  switch (gold.kind) {
    case AnswerKind::Spans: return "span";
    case AnswerKind::Date: return "date";
    case AnswerKind::Number: {
      double v = gold.number.value_or(0.0);
      double r = std::round(v);
      return (std::abs(v - r) < 1e-9 && r >= 0 && r <= 9) ? "count" : "number";
    }
  }
  return "number";
}

/// Gold reference strings for scoring: spans as-is, numbers rendered
/// canonically, dates joined day month year over non-empty parts.
inline std::vector<std::string> gold_answer_strings(const AnswerSpec& gold) {
  switch (gold.kind) {
    case AnswerKind::Spans: return *gold.spans;
    case AnswerKind::Number: return {render_number(*gold.number)};
    case AnswerKind::Date: {
      std::vector<std::string> parts;
      for (const std::string& p : {gold.date->day, gold.date->month, gold.date->year})
        if (!p.empty()) parts.push_back(p);
      return {join(parts, " ")};
    }
  }
  return {};
}

}  // namespace evidr
