// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// Evidence detection over sentence and clause fragments, the token-level
// evidence distribution, and its fusion into the sequence representation.
#pragma once

#include <string>
#include <vector>

#include "evidr/corpus.hpp"
#include "evidr/encoder.hpp"
#include "evidr/nn.hpp"
#include "evidr/supervision.hpp"

namespace evidr {

enum class EvidenceCombiner { Mean, Max, Product };

inline EvidenceCombiner parse_combiner(const std::string& s) {
  if (s == "mean") return EvidenceCombiner::Mean;
  if (s == "max") return EvidenceCombiner::Max;
  if (s == "product") return EvidenceCombiner::Product;
  throw config_error("evidence_combiner must be mean, max, or product; got '" + s + "'");
}

/// Tape ids of the detector outputs. p_sentence/p_clause are (m x 1) columns
/// over fragments; p_seq is an (L x 1) column with exact ones at question
/// and special rows.
template <typename T>
struct EvidenceScores {
  int p_sentence = -1;
  int p_clause = -1;
  int p_seq = -1;
};

inline void register_detector_params(auto& store, int d_h) {
  store.add("detector.q_score", d_h, 1, InitKind::Xavier);
  store.add("detector.sent.score", d_h, 1, InitKind::Xavier);
  store.add("detector.clause.score", d_h, 1, InitKind::Xavier);
  register_ffn(store, "detector.sent.ffn", 3 * d_h, d_h, 2);
  register_ffn(store, "detector.clause.ffn", 3 * d_h, d_h, 2);
  store.add("fuse.ln.gain", 1, d_h, InitKind::One);
  store.add("fuse.ln.bias", 1, d_h, InitKind::Zero);
}

/// The question summary S^Q: attention pooling over the question rows.
template <typename T>
int question_summary(Tape<T>& tape, const ParameterStore<T>& store, BoundParams<T>& bp,
                     const EncodedSequence& enc, int h) {
  std::vector<int> rows;
  for (int r = enc.q_begin; r < enc.q_end; ++r) rows.push_back(r);
  return summarize(tape, store, bp, "detector.q_score", tape.gather_rows(h, std::move(rows)));
}

/// Per-fragment evidence probability: positive-class softmax output of an
/// FFN over [S^Q; S_k; S^Q (*) S_k]. Returns a (m x 1) column, or -1 when
/// the fragment list is empty.
template <typename T>
int detect(Tape<T>& tape, const ParameterStore<T>& store, BoundParams<T>& bp,
           const EncodedSequence& enc, int h, int s_q, const std::vector<Fragment>& frags,
           const std::string& prefix) {
  if (frags.empty()) return -1;
  std::vector<int> features;
  features.reserve(frags.size());
  for (const Fragment& f : frags) {
    std::vector<int> rows;
    for (int t = f.start; t < f.end; ++t) rows.push_back(enc.passage_row(t));
    int s_k = summarize(tape, store, bp, "detector." + prefix + ".score",
                        tape.gather_rows(h, std::move(rows)));
    features.push_back(tape.concat_cols({s_q, s_k, tape.mul(s_q, s_k)}));
  }
  int stacked = features.size() == 1 ? features[0] : tape.concat_rows(std::move(features));
  int probs = tape.softmax(ffn(tape, store, bp, "detector." + prefix + ".ffn", stacked));
  // Positive class = column 1; flatten row-major and gather the odd rows.
  const int m = static_cast<int>(frags.size());
  int flat = tape.reshape(probs, 2 * m, 1);
  std::vector<int> odd(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) odd[k] = 2 * k + 1;
  return tape.gather_rows(flat, std::move(odd));
}

/// Token-level distribution: question and special rows get exactly 1;
/// passage token i in sentence k and clause j combines p_sentence[k] with
/// p_clause[j] under the configured rule (mean by default).
template <typename T>
int token_distribution(Tape<T>& tape, const EncodedSequence& enc,
                       const std::vector<Fragment>& sentences,
                       const std::vector<Fragment>& clauses, int p_sentence, int p_clause,
                       EvidenceCombiner combiner) {
  std::vector<int> sent_of(static_cast<std::size_t>(enc.Lp), -1);
  std::vector<int> clause_of(static_cast<std::size_t>(enc.Lp), -1);
  for (const Fragment& f : sentences)
    for (int t = f.start; t < f.end && t < enc.Lp; ++t) sent_of[t] = f.frag_id;
  for (const Fragment& f : clauses)
    for (int t = f.start; t < f.end && t < enc.Lp; ++t) clause_of[t] = f.frag_id;
  for (int t = 0; t < enc.Lp; ++t)
    if (sent_of[t] < 0 || clause_of[t] < 0)
      throw model_error("passage token " + std::to_string(t) + " lies in no fragment");

  Tensor<T> base(enc.L, 1);
  base.at(enc.cls_row, 0) = T(1);
  base.at(enc.sep_row, 0) = T(1);
  base.at(enc.end_row, 0) = T(1);
  for (int r = enc.q_begin; r < enc.q_end; ++r) base.at(r, 0) = T(1);
  int base_id = tape.constant(std::move(base));

  const Tensor<T>& ps = tape.value(p_sentence);
  const Tensor<T>& pc = tape.value(p_clause);
  auto frag_scatter = [&](const std::vector<int>& frag_of, int src) {
    std::vector<std::vector<int>> map(static_cast<std::size_t>(enc.L));
    for (int t = 0; t < enc.Lp; ++t) map[enc.passage_row(t)] = {frag_of[t]};
    return tape.scatter_rows(src, std::move(map), enc.L);
  };

  int passage_part = -1;
  switch (combiner) {
    case EvidenceCombiner::Mean: {
      int s = frag_scatter(sent_of, p_sentence);
      int c = frag_scatter(clause_of, p_clause);
      passage_part = tape.affine(tape.add(s, c), 0.5, 0.0);
      break;
    }
    case EvidenceCombiner::Product: {
      int s = frag_scatter(sent_of, p_sentence);
      int c = frag_scatter(clause_of, p_clause);
      // Question/special rows hold 0 in both factors; base supplies their 1.
      int prod = tape.mul(s, c);
      passage_part = prod;
      break;
    }
    case EvidenceCombiner::Max: {
      // Exact max with the correct subgradient: pick the larger forward
      // value per token and route the gradient to it alone.
      std::vector<std::vector<int>> map(static_cast<std::size_t>(enc.L));
      std::vector<int> joint_sel(static_cast<std::size_t>(enc.Lp));
      for (int t = 0; t < enc.Lp; ++t) {
        T sv = ps.at(sent_of[t], 0);
        T cv = pc.at(clause_of[t], 0);
        joint_sel[t] = sv >= cv ? sent_of[t] : ps.rows + clause_of[t];
      }
      int joined = tape.concat_rows({p_sentence, p_clause});
      for (int t = 0; t < enc.Lp; ++t) map[enc.passage_row(t)] = {joint_sel[t]};
      passage_part = tape.scatter_rows(joined, std::move(map), enc.L);
      break;
    }
  }
  return tape.add(base_id, passage_part);
}

/// H_ED = LN(H + p_seq (*) H), row-wise.
template <typename T>
int fuse(Tape<T>& tape, const ParameterStore<T>& store, BoundParams<T>& bp, int h, int p_seq) {
  int scaled = tape.mul(h, p_seq);
  return tape.layer_norm(tape.add(h, scaled), bp.leaf(tape, store, "fuse.ln.gain"),
                         bp.leaf(tape, store, "fuse.ln.bias"));
}

}  // namespace evidr
