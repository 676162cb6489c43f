// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// The five answer heads over the reasoned sequence: answer-type classifier,
// question/passage span extraction with question-aware gating, per-number
// sign classification, count classification and BIO multi-span tagging.
// Decoding back to answer strings lives here too.
#pragma once

#include <array>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "evidr/common.hpp"
#include "evidr/corpus.hpp"
#include "evidr/detector.hpp"
#include "evidr/encoder.hpp"
#include "evidr/evaluation.hpp"
#include "evidr/nn.hpp"
#include "evidr/params.hpp"
#include "evidr/supervision.hpp"
#include "evidr/tape.hpp"

namespace evidr {

/// How the evidence probability enters the sign head.
enum class SignGating { Multiplicative, Masked };

inline SignGating parse_sign_gating(const std::string& s) {
  if (s == "multiplicative") return SignGating::Multiplicative;
  if (s == "masked") return SignGating::Masked;
  throw config_error("unknown sign_gating '" + s + "' (expected multiplicative or masked)");
}

/// Tape ids of every head output, all probabilities after softmax.
/// Shapes: type (1 x 5), span rows (1 x L), signs (N x 3, plus/minus/zero),
/// count (1 x 10), bio (L x 3, columns ordered O/B/I like the tag ids).
struct HeadOutputs {
  int type_probs = -1;
  int q_start = -1, q_end = -1;
  int p_start = -1, p_end = -1;
  int sign_probs = -1;  // -1 when the instance has no numbers
  int count_probs = -1;
  int bio_probs = -1;
};

template <typename T>
void register_predictor_params(ParameterStore<T>& store, int d_h) {
  store.add("heads.q_score", d_h, 1, InitKind::Xavier);
  store.add("heads.p_score", d_h, 1, InitKind::Xavier);
  register_ffn(store, "span.gq", d_h, d_h, 1);
  register_ffn(store, "span.start", 2 * d_h, d_h, 1);
  register_ffn(store, "span.end", 2 * d_h, d_h, 1);
  register_ffn(store, "type.ffn", 2 * d_h, d_h, kNumAnswerTypes);
  register_ffn(store, "sign.ffn", 3 * d_h, d_h, 3);
  store.add("count.w_u", d_h, 1, InitKind::Xavier);
  register_ffn(store, "count.ffn", 3 * d_h, d_h, 10);
  register_ffn(store, "bio.ffn", d_h, d_h, 3);
}

namespace detail {

/// Start/end distribution over one side of the sequence: logits are gated by
/// the evidence distribution, then softmaxed over that side's rows only.
template <typename T>
int side_softmax(Tape<T>& tape, int gated_row, int lo, int hi, int len) {
  std::vector<uint8_t> mask(static_cast<std::size_t>(len), 0);
  for (int i = lo; i < hi; ++i) mask[static_cast<std::size_t>(i)] = 1;
  return tape.masked_softmax(gated_row, mask);
}

}  // namespace detail

/// Runs every head. `gate_pseq` is the (L x 1) evidence distribution used for
/// gating in the span and sign heads; pass an all-ones constant to disable
/// gating. `number_rows` maps the combined question-then-passage number order
/// to sequence rows.
template <typename T>
HeadOutputs predict_heads(Tape<T>& tape, const ParameterStore<T>& store, BoundParams<T>& bp,
                          const EncodedSequence& enc, int herg, int gate_pseq,
                          const std::vector<int>& number_rows, SignGating gating) {
  HeadOutputs out;
  const int L = enc.L;

  std::vector<int> q_rows, p_rows;
  for (int i = enc.q_begin; i < enc.q_end; ++i) q_rows.push_back(i);
  for (int i = enc.p_begin; i < enc.p_end; ++i) p_rows.push_back(i);
  int hq = summarize(tape, store, bp, "heads.q_score", tape.gather_rows(herg, q_rows));
  int hp = summarize(tape, store, bp, "heads.p_score", tape.gather_rows(herg, p_rows));

  out.type_probs = tape.softmax(ffn(tape, store, bp, "type.ffn", tape.concat_cols({hq, hp})));

  // Span head: fuse the question summary into every row, gate by evidence.
  int g_q = summarize_ffn(tape, store, bp, "span.gq", tape.gather_rows(herg, q_rows));
  int m = tape.concat_cols({herg, tape.mul(herg, g_q)});
  int start_gated = tape.reshape(tape.mul(ffn(tape, store, bp, "span.start", m), gate_pseq), 1, L);
  int end_gated = tape.reshape(tape.mul(ffn(tape, store, bp, "span.end", m), gate_pseq), 1, L);
  out.q_start = detail::side_softmax(tape, start_gated, enc.q_begin, enc.q_end, L);
  out.q_end = detail::side_softmax(tape, end_gated, enc.q_begin, enc.q_end, L);
  out.p_start = detail::side_softmax(tape, start_gated, enc.p_begin, enc.p_end, L);
  out.p_end = detail::side_softmax(tape, end_gated, enc.p_begin, enc.p_end, L);

  const int n = static_cast<int>(number_rows.size());
  int h_u;
  if (n > 0) {
    int u = tape.gather_rows(herg, number_rows);
    int sign_logits =
        ffn(tape, store, bp, "sign.ffn",
            tape.concat_cols({u, repeat_row(tape, hp, n), repeat_row(tape, hq, n)}));
    // Column weights (p, p, 1-p): evidence favors participation, its
    // complement favors the zero sign.
    int p_num = tape.gather_rows(gate_pseq, number_rows);
    int w = tape.concat_cols({p_num, p_num, tape.affine(p_num, T(-1), T(1))});
    int gated = gating == SignGating::Multiplicative
                    ? tape.mul(sign_logits, w)
                    : tape.add(sign_logits, tape.log_clamped(w, T(1e-6)));
    out.sign_probs = tape.softmax(gated);

    int alpha = tape.softmax(tape.reshape(tape.matmul(u, bp.leaf(tape, store, "count.w_u")), 1, n));
    h_u = tape.weighted_sum(alpha, u);
  } else {
    h_u = tape.constant(Tensor<T>(1, store.get("count.w_u").rows));
  }
  out.count_probs =
      tape.softmax(ffn(tape, store, bp, "count.ffn", tape.concat_cols({h_u, hp, hq})));

  out.bio_probs = tape.softmax(ffn(tape, store, bp, "bio.ffn", herg));
  return out;
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

/// Head probabilities pulled off the tape as plain doubles, plus the decoded
/// answer once decode_answer has run.
struct PredictionResult {
  std::array<double, kNumAnswerTypes> type_probs{};
  std::vector<double> q_start, q_end, p_start, p_end;  // indexed by sequence row
  std::vector<std::array<double, 3>> sign_probs;       // plus, minus, zero
  std::array<double, 10> count_probs{};
  std::vector<std::array<double, 3>> bio_probs;  // O, B, I

  AnswerType type = AnswerType::PassageSpan;
  std::vector<std::string> answers;
};

template <typename T>
PredictionResult extract_predictions(const Tape<T>& tape, const HeadOutputs& heads) {
  PredictionResult r;
  const Tensor<T>& tp = tape.value(heads.type_probs);
  for (int k = 0; k < kNumAnswerTypes; ++k) r.type_probs[static_cast<std::size_t>(k)] = tp.at(0, k);
  auto row_vec = [&](int id) {
    const Tensor<T>& v = tape.value(id);
    std::vector<double> out(static_cast<std::size_t>(v.cols));
    for (int j = 0; j < v.cols; ++j) out[static_cast<std::size_t>(j)] = v.at(0, j);
    return out;
  };
  r.q_start = row_vec(heads.q_start);
  r.q_end = row_vec(heads.q_end);
  r.p_start = row_vec(heads.p_start);
  r.p_end = row_vec(heads.p_end);
  if (heads.sign_probs >= 0) {
    const Tensor<T>& sp = tape.value(heads.sign_probs);
    for (int i = 0; i < sp.rows; ++i)
      r.sign_probs.push_back({static_cast<double>(sp.at(i, 0)), static_cast<double>(sp.at(i, 1)),
                              static_cast<double>(sp.at(i, 2))});
  }
  const Tensor<T>& cp = tape.value(heads.count_probs);
  for (int k = 0; k < 10; ++k) r.count_probs[static_cast<std::size_t>(k)] = cp.at(0, k);
  const Tensor<T>& bp = tape.value(heads.bio_probs);
  for (int i = 0; i < bp.rows; ++i)
    r.bio_probs.push_back({static_cast<double>(bp.at(i, 0)), static_cast<double>(bp.at(i, 1)),
                           static_cast<double>(bp.at(i, 2))});
  return r;
}

namespace detail {

constexpr int kMaxSpanLength = 20;  // tokens, exclusive upper bound on end-start

/// Best (start, end) pair with start <= end < start + 20 within [lo, hi) rows,
/// scored by start_prob * end_prob. Returns {-1, -1} when the side is empty.
inline std::pair<int, int> best_span(const std::vector<double>& start,
                                     const std::vector<double>& end, int lo, int hi) {
  int bs = -1, be = -1;
  double best = -1.0;
  for (int s = lo; s < hi; ++s)
    for (int e = s; e < hi && e - s < kMaxSpanLength; ++e) {
      double v = start[static_cast<std::size_t>(s)] * end[static_cast<std::size_t>(e)];
      if (v > best) {
        best = v;
        bs = s;
        be = e;
      }
    }
  return {bs, be};
}

inline std::string span_text(const std::string& text, const std::vector<Token>& tokens,
                             int first_tok, int last_tok) {
  std::size_t lo = tokens[static_cast<std::size_t>(first_tok)].char_start;
  std::size_t hi = tokens[static_cast<std::size_t>(last_tok)].char_end;
  return text.substr(lo, hi - lo);
}

}  // namespace detail

/// Greedy BIO decode over passage rows: B opens a span, I extends the open
/// span or opens one when none is open, O closes. Duplicate spans (same
/// normalized form) are dropped.
inline std::vector<std::string> decode_multispan(const PredictionResult& pred,
                                                 const EncodedSequence& enc,
                                                 const std::string& passage_text,
                                                 const std::vector<Token>& passage_tokens) {
  std::vector<std::pair<int, int>> spans;  // inclusive token ranges
  int open = -1;
  for (int t = 0; t < enc.Lp; ++t) {
    const auto& p = pred.bio_probs[static_cast<std::size_t>(enc.p_begin + t)];
    int tag = 0;
    if (p[1] >= p[0] && p[1] >= p[2])
      tag = kBioB;
    else if (p[2] > p[0])
      tag = kBioI;
    if (tag == kBioB) {
      if (open >= 0) spans.emplace_back(open, t - 1);
      open = t;
    } else if (tag == kBioI) {
      if (open < 0) open = t;  // I without B still opens a span
    } else {
      if (open >= 0) spans.emplace_back(open, t - 1);
      open = -1;
    }
  }
  if (open >= 0) spans.emplace_back(open, enc.Lp - 1);

  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto [s, e] : spans) {
    std::string text = detail::span_text(passage_text, passage_tokens, s, e);
    std::string key = normalized_string(text);
    if (key.empty() || !seen.insert(key).second) continue;
    out.push_back(std::move(text));
  }
  return out;
}

/// Turns head probabilities into answer strings. Types are tried in
/// descending probability; a type that cannot produce an answer (arithmetic
/// with all-zero signs, empty multi-span, no numbers) falls through to the
/// next, and passage span is the terminal fallback.
inline void decode_answer(PredictionResult& pred, const EncodedSequence& enc,
                          const std::string& question_text,
                          const std::vector<Token>& question_tokens,
                          const std::string& passage_text,
                          const std::vector<Token>& passage_tokens,
                          const std::vector<double>& number_values) {
  std::array<int, kNumAnswerTypes> order{};
  for (int k = 0; k < kNumAnswerTypes; ++k) order[static_cast<std::size_t>(k)] = k;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return pred.type_probs[static_cast<std::size_t>(a)] > pred.type_probs[static_cast<std::size_t>(b)];
  });

  auto passage_span = [&]() -> std::vector<std::string> {
    auto [s, e] = detail::best_span(pred.p_start, pred.p_end, enc.p_begin, enc.p_end);
    if (s < 0) return {};
    return {detail::span_text(passage_text, passage_tokens, s - enc.p_begin, e - enc.p_begin)};
  };

  for (int k : order) {
    auto type = static_cast<AnswerType>(k);
    switch (type) {
      case AnswerType::QuestionSpan: {
        auto [s, e] = detail::best_span(pred.q_start, pred.q_end, enc.q_begin, enc.q_end);
        if (s < 0) continue;
        pred.type = type;
        pred.answers = {
            detail::span_text(question_text, question_tokens, s - enc.q_begin, e - enc.q_begin)};
        return;
      }
      case AnswerType::PassageSpan: {
        auto ans = passage_span();
        if (ans.empty()) continue;
        pred.type = type;
        pred.answers = std::move(ans);
        return;
      }
      case AnswerType::Arithmetic: {
        if (pred.sign_probs.empty()) continue;
        double total = 0.0;
        bool any = false;
        for (std::size_t i = 0; i < pred.sign_probs.size(); ++i) {
          const auto& p = pred.sign_probs[i];
          if (p[0] >= p[1] && p[0] >= p[2]) {
            total += number_values[i];
            any = true;
          } else if (p[1] >= p[2]) {
            total -= number_values[i];
            any = true;
          }
        }
        if (!any) continue;  // all-zero composition carries no answer
        pred.type = type;
        pred.answers = {render_number(total)};
        return;
      }
      case AnswerType::Count: {
        int best = 0;
        for (int c = 1; c < 10; ++c)
          if (pred.count_probs[static_cast<std::size_t>(c)] >
              pred.count_probs[static_cast<std::size_t>(best)])
            best = c;
        pred.type = type;
        pred.answers = {std::to_string(best)};
        return;
      }
      case AnswerType::MultiSpan: {
        auto spans = decode_multispan(pred, enc, passage_text, passage_tokens);
        if (spans.size() < 2) continue;
        pred.type = type;
        pred.answers = std::move(spans);
        return;
      }
    }
  }
  // Pathological fallback: take the best passage pair regardless.
  pred.type = AnswerType::PassageSpan;
  pred.answers = passage_span();
  if (pred.answers.empty()) pred.answers = {""};
}

}  // namespace evidr
