// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end composition: instance preparation (truncation, labeling,
// annotation, graph construction), the full forward pass, the joint loss
// (marginal answer likelihood plus weighted evidence BCE), whole-model
// checkpointing with vocabulary/config sidecars, and dataset evaluation.
#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "evidr/config.hpp"
#include "evidr/corpus.hpp"
#include "evidr/detector.hpp"
#include "evidr/drop_io.hpp"
#include "evidr/encoder.hpp"
#include "evidr/evaluation.hpp"
#include "evidr/graph.hpp"
#include "evidr/nn.hpp"
#include "evidr/params.hpp"
#include "evidr/predictors.hpp"
#include "evidr/supervision.hpp"
#include "evidr/tape.hpp"

namespace evidr {

/// One question against one (possibly truncated) passage with everything the
/// forward pass and loss need precomputed.
struct PreparedInstance {
  Document doc;
  QAInstance qa;
  EvidenceLabels labels;
  AnswerAnnotations ann;
  HeteroGraph graph;
  std::vector<std::string> gold_strings;
  std::string bucket;
  bool truncated = false;
};

/// Builds supervision for one instance. Over-long passages lose their tail so
/// that [CLS] question [SEP] passage [SEP] fits in max_seq_len; fragments and
/// number mentions are rebuilt from the surviving tokens, so every derived
/// structure stays consistent with what the encoder sees.
inline PreparedInstance prepare_instance(const Document& doc, const QAInstance& qa,
                                         const TrainConfig& cfg) {
  PreparedInstance p;
  p.qa = qa;
  const int budget = cfg.max_seq_len - 3 - static_cast<int>(qa.question_tokens.size());
  if (budget < 1)
    throw model_error("question " + qa.query_id + " fills the whole encoder window; only the "
                      "passage tail may be truncated, never the question");
  if (static_cast<int>(doc.tokens.size()) > budget) {
    p.truncated = true;
    Document d;
    d.passage_id = doc.passage_id;
    d.text = doc.text;  // char offsets of kept tokens stay valid
    d.tokens.assign(doc.tokens.begin(), doc.tokens.begin() + budget);
    segment(d.tokens, d.sentences, d.clauses);
    d.numbers = extract_numbers(d.tokens);
    p.doc = std::move(d);
  } else {
    p.doc = doc;
  }
  p.labels = label_evidence(p.doc, qa);
  p.ann = build_annotations(p.doc, qa, cfg.max_expr_terms, cfg.expression_cap);
  p.graph = build_graph(p.doc, qa);
  p.gold_strings = gold_answer_strings(qa.gold);
  p.bucket = bucket_of(qa.gold);
  return p;
}

inline std::vector<PreparedInstance> prepare_dataset(const Dataset& ds, const TrainConfig& cfg) {
  std::vector<PreparedInstance> out;
  for (const DatasetEntry& e : ds.entries)
    for (const QAInstance& qa : e.instances) out.push_back(prepare_instance(e.doc, qa, cfg));
  return out;
}

/// Vocabulary from every training token (lowercased words; numbers are
/// handled by the shared marker embedding instead).
inline Vocabulary build_vocabulary(const Dataset& ds) {
  Vocabulary v;
  for (const DatasetEntry& e : ds.entries) {
    v.add_tokens(e.doc.tokens);
    for (const QAInstance& qa : e.instances) v.add_tokens(qa.question_tokens);
  }
  return v;
}

template <typename T>
void register_all_params(ParameterStore<T>& store, const TrainConfig& cfg, int vocab_size) {
  register_encoder_params(store, cfg.hidden_size, vocab_size, cfg.max_seq_len);
  register_detector_params(store, cfg.hidden_size);
  register_graph_params(store, cfg.hidden_size);
  register_predictor_params(store, cfg.hidden_size);
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

template <typename T>
struct ForwardPass {
  BoundParams<T> bound;
  EncodedSequence enc;
  EvidenceScores<T> scores;  // real detector outputs, used by the evidence loss
  int gate_pseq = -1;        // distribution gating fusion and heads
  int herg = -1;
  HeadOutputs heads;
  std::vector<int> number_rows;  // combined number order -> sequence rows
};

namespace detail {

/// Sequence rows of every number mention, question mentions first.
inline std::vector<int> number_sequence_rows(const PreparedInstance& prep,
                                             const EncodedSequence& enc) {
  std::vector<int> rows;
  for (const NumberMention& m : prep.qa.question_numbers)
    rows.push_back(enc.question_row(m.token_index));
  for (const NumberMention& m : prep.doc.numbers) rows.push_back(enc.passage_row(m.token_index));
  return rows;
}

template <typename T>
int label_column(Tape<T>& tape, const std::vector<std::uint8_t>& labels) {
  Tensor<T> t(static_cast<int>(labels.size()), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) t.at(static_cast<int>(i), 0) = T(labels[i]);
  return tape.constant(std::move(t));
}

template <typename T>
int ones_column(Tape<T>& tape, int rows) {
  Tensor<T> t(rows, 1);
  for (T& v : t.data) v = T(1);
  return tape.constant(std::move(t));
}

}  // namespace detail

/// Full forward pass. With `teacher_force` the graph and gating consume the
/// gold evidence labels instead of the detector outputs; the detector still
/// runs and its real probabilities stay in `scores` for the evidence loss.
template <typename T>
ForwardPass<T> run_forward(Tape<T>& tape, const ParameterStore<T>& store, const Vocabulary& vocab,
                           const TrainConfig& cfg, const PreparedInstance& prep,
                           bool teacher_force = false) {
  ForwardPass<T> fp;
  fp.enc = encode(tape, store, fp.bound, vocab, prep.qa.question_tokens, prep.doc.tokens,
                  cfg.hidden_size, cfg.max_seq_len);
  int h = fp.enc.h;
  int s_q = question_summary(tape, store, fp.bound, fp.enc, h);

  EvidenceCombiner comb = parse_combiner(cfg.evidence_combiner);
  fp.scores.p_sentence = detect(tape, store, fp.bound, fp.enc, h, s_q, prep.doc.sentences, "sent");
  fp.scores.p_clause = detect(tape, store, fp.bound, fp.enc, h, s_q, prep.doc.clauses, "clause");
  if (fp.scores.p_sentence >= 0) {
    fp.scores.p_seq = token_distribution(tape, fp.enc, prep.doc.sentences, prep.doc.clauses,
                                         fp.scores.p_sentence, fp.scores.p_clause, comb);
  } else {
    // Empty passage: nothing to weight, the distribution is all ones.
    fp.scores.p_seq = detail::ones_column(tape, fp.enc.L);
  }

  EvidenceScores<T> model_scores = fp.scores;
  if (teacher_force && fp.scores.p_sentence >= 0) {
    model_scores.p_sentence = detail::label_column(tape, prep.labels.sentence_labels);
    model_scores.p_clause = detail::label_column(tape, prep.labels.clause_labels);
    model_scores.p_seq = token_distribution(tape, fp.enc, prep.doc.sentences, prep.doc.clauses,
                                            model_scores.p_sentence, model_scores.p_clause, comb);
  }

  fp.gate_pseq =
      cfg.use_evidence_gating ? model_scores.p_seq : detail::ones_column(tape, fp.enc.L);
  int h_ed = fuse(tape, store, fp.bound, h, fp.gate_pseq);
  fp.herg = reason_and_fuse(tape, store, fp.bound, prep.graph, prep.doc, fp.enc, h_ed,
                            model_scores, cfg.reasoning_steps,
                            parse_number_node_weight(cfg.number_node_weight), cfg.use_graph,
                            cfg.hidden_size);
  fp.number_rows = detail::number_sequence_rows(prep, fp.enc);
  fp.heads = predict_heads(tape, store, fp.bound, fp.enc, fp.herg, fp.gate_pseq, fp.number_rows,
                           parse_sign_gating(cfg.sign_gating));
  return fp;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

template <typename T>
struct LossIds {
  int total = -1;         // -1 when the instance contributes nothing
  int answer = -1;        // -1 for untrainable instances
  int evi_sentence = -1;  // -1 when the passage has no fragments
  int evi_clause = -1;
};

namespace detail {

inline constexpr double kProbFloor = 1e-7;   // BCE clamp, both sides
inline constexpr double kLogFloor = 1e-12;   // marginal log-prob clamp

/// Mean binary cross-entropy of fragment probabilities against 0/1 labels.
template <typename T>
int bce_loss(Tape<T>& tape, int probs, const std::vector<std::uint8_t>& labels) {
  int y = label_column(tape, labels);
  int log_p = tape.log_clamped(probs, kProbFloor);
  int log_1mp = tape.log_clamped(tape.affine(probs, -1.0, 1.0), kProbFloor);
  int terms = tape.add(tape.mul(y, log_p), tape.mul(tape.affine(y, -1.0, 1.0), log_1mp));
  return tape.affine(tape.mean(terms), -1.0, 0.0);
}

/// log of one probability row entry, via flatten + gather.
template <typename T>
int log_at(Tape<T>& tape, int probs_row, int len, int index) {
  int flat = tape.log_clamped(tape.reshape(probs_row, len, 1), kLogFloor);
  return tape.gather_rows(flat, {index});
}

/// Log-likelihood of an answer type given the heads, or -1 when the type has
/// no way to express the gold answer.
template <typename T>
int log_prob_of_type(Tape<T>& tape, const ForwardPass<T>& fp, const PreparedInstance& prep,
                     AnswerType z) {
  const EncodedSequence& enc = fp.enc;
  const AnswerAnnotations& ann = prep.ann;
  const HeadOutputs& heads = fp.heads;

  auto span_marginal = [&](int start_id, int end_id, int row_base,
                           const std::vector<std::pair<int, int>>& spans) -> int {
    int ls = tape.log_clamped(tape.reshape(start_id, enc.L, 1), kLogFloor);
    int le = tape.log_clamped(tape.reshape(end_id, enc.L, 1), kLogFloor);
    std::vector<int> terms;
    for (const auto& [s, e] : spans)
      terms.push_back(
          tape.add(tape.gather_rows(ls, {row_base + s}), tape.gather_rows(le, {row_base + e})));
    return log_sum_exp(tape, terms.size() == 1 ? terms[0] : tape.concat_rows(std::move(terms)));
  };

  switch (z) {
    case AnswerType::PassageSpan:
      if (ann.passage_spans.empty()) return -1;
      return span_marginal(heads.p_start, heads.p_end, enc.p_begin, ann.passage_spans);
    case AnswerType::QuestionSpan:
      if (ann.question_spans.empty()) return -1;
      return span_marginal(heads.q_start, heads.q_end, enc.q_begin, ann.question_spans);
    case AnswerType::Arithmetic: {
      if (ann.expressions.assignments.empty() || heads.sign_probs < 0) return -1;
      const int n = static_cast<int>(fp.number_rows.size());
      int flat = tape.log_clamped(tape.reshape(heads.sign_probs, 3 * n, 1), kLogFloor);
      std::vector<int> terms;
      for (const SignAssignment& a : ann.expressions.assignments) {
        std::vector<int> rows;
        for (int i = 0; i < n; ++i) {
          int col = a.signs[static_cast<std::size_t>(i)] > 0   ? 0
                    : a.signs[static_cast<std::size_t>(i)] < 0 ? 1
                                                               : 2;
          rows.push_back(3 * i + col);
        }
        terms.push_back(tape.sum(tape.gather_rows(flat, std::move(rows))));
      }
      return log_sum_exp(tape, terms.size() == 1 ? terms[0] : tape.concat_rows(std::move(terms)));
    }
    case AnswerType::Count:
      if (!ann.count_label) return -1;
      return log_at(tape, heads.count_probs, 10, *ann.count_label);
    case AnswerType::MultiSpan: {
      if (ann.bio_tags.empty()) return -1;
      int flat = tape.log_clamped(tape.reshape(heads.bio_probs, 3 * enc.L, 1), kLogFloor);
      std::vector<int> rows;
      for (int t = 0; t < enc.Lp; ++t)
        rows.push_back(3 * enc.passage_row(t) + ann.bio_tags[static_cast<std::size_t>(t)]);
      return tape.sum(tape.gather_rows(flat, std::move(rows)));
    }
  }
  return -1;
}

}  // namespace detail

/// Joint loss: negative log of the answer likelihood marginalized over every
/// feasible type (each weighted by its type probability), plus the weighted
/// evidence BCE terms. Untrainable instances keep the evidence terms only.
template <typename T>
LossIds<T> build_loss(Tape<T>& tape, const ForwardPass<T>& fp, const PreparedInstance& prep,
                      const TrainConfig& cfg) {
  LossIds<T> out;
  if (fp.scores.p_sentence >= 0) {
    out.evi_sentence = detail::bce_loss(tape, fp.scores.p_sentence, prep.labels.sentence_labels);
    out.evi_clause = detail::bce_loss(tape, fp.scores.p_clause, prep.labels.clause_labels);
  }
  if (prep.ann.trainable) {
    int type_log =
        tape.log_clamped(tape.reshape(fp.heads.type_probs, kNumAnswerTypes, 1), detail::kLogFloor);
    std::vector<int> joints;
    for (AnswerType z : prep.ann.feasible) {
      int lp = detail::log_prob_of_type(tape, fp, prep, z);
      if (lp < 0) continue;
      joints.push_back(tape.add(lp, tape.gather_rows(type_log, {static_cast<int>(z)})));
    }
    if (!joints.empty()) {
      int marginal =
          log_sum_exp(tape, joints.size() == 1 ? joints[0] : tape.concat_rows(std::move(joints)));
      out.answer = tape.affine(marginal, -1.0, 0.0);
    }
  }

  int total = out.answer;
  if (out.evi_sentence >= 0) {
    int weighted = tape.add(tape.affine(out.evi_sentence, cfg.lambda_sentence, 0.0),
                            tape.affine(out.evi_clause, cfg.lambda_clause, 0.0));
    total = total >= 0 ? tape.add(total, weighted) : weighted;
  }
  out.total = total;
  return out;
}

// ---------------------------------------------------------------------------
// Model bundle and checkpointing
// ---------------------------------------------------------------------------

template <typename T>
struct Model {
  TrainConfig cfg;
  Vocabulary vocab;
  ParameterStore<T> store;
};

template <typename T>
Model<T> make_model(const TrainConfig& cfg, Vocabulary vocab) {
  Model<T> m{cfg, std::move(vocab), {}};
  m.store.rng_seed = cfg.seed;
  register_all_params(m.store, m.cfg, m.vocab.size());
  return m;
}

inline std::string config_sidecar_path(const std::string& ckpt) { return ckpt + ".config"; }

/// Writes the parameter checkpoint plus the vocabulary and resolved-config
/// sidecars that make it self-describing.
template <typename T>
void save_model(const Model<T>& m, const std::string& path) {
  save_checkpoint(path, m.store);
  m.vocab.save(vocab_sidecar_path(path));
  std::ofstream out(config_sidecar_path(path), std::ios::trunc);
  if (!out) throw file_error("cannot write config sidecar: " + config_sidecar_path(path));
  out << echo_config(m.cfg);
}

template <typename T>
Model<T> load_model(const std::string& path) {
  std::ifstream probe(config_sidecar_path(path));
  if (!probe)
    throw checkpoint_error("missing config sidecar " + config_sidecar_path(path) +
                           " next to checkpoint " + path);
  probe.close();
  TrainConfig cfg = load_config(config_sidecar_path(path));
  Model<T> m = make_model<T>(cfg, Vocabulary::load(vocab_sidecar_path(path)));
  ParameterStore<T> loaded;
  load_checkpoint(path, loaded);
  for (const auto& [name, p] : m.store.params) {
    auto it = loaded.params.find(name);
    if (it == loaded.params.end())
      throw checkpoint_error("checkpoint " + path + " lacks parameter " + name);
    if (it->second.rows != p.rows || it->second.cols != p.cols)
      throw checkpoint_error("checkpoint " + path + " has wrong shape for " + name);
  }
  if (loaded.params.size() != m.store.params.size())
    throw checkpoint_error("checkpoint " + path + " carries unknown parameters");
  m.store.params = std::move(loaded.params);
  return m;
}

// ---------------------------------------------------------------------------
// Evaluation driver
// ---------------------------------------------------------------------------

template <typename T>
EvalReport evaluate_model(const Model<T>& m, const std::vector<PreparedInstance>& data,
                          double threshold = 0.5) {
  EvalReport rep;
  std::vector<EvidenceLabels> all_labels;
  for (const PreparedInstance& prep : data) {
    Tape<T> tape;
    ForwardPass<T> fp = run_forward(tape, m.store, m.vocab, m.cfg, prep);
    PredictionResult pr = extract_predictions(tape, fp.heads);
    decode_answer(pr, fp.enc, prep.qa.question, prep.qa.question_tokens, prep.doc.text,
                  prep.doc.tokens, combined_number_values(prep.doc, prep.qa));
    auto [em, f1] = em_f1(pr.answers, prep.gold_strings);

    InstanceEval rec;
    rec.query_id = prep.qa.query_id;
    rec.predicted_type = pr.type;
    rec.answers = pr.answers;
    rec.gold = prep.gold_strings;
    rec.bucket = prep.bucket;
    rec.em = em;
    rec.f1 = f1;
    rep.records.push_back(std::move(rec));

    rep.total += 1;
    rep.em_sum += em;
    rep.f1_sum += f1;
    BucketStats& b = rep.per_type[prep.bucket];
    b.count += 1;
    b.em_sum += em;
    b.f1_sum += f1;

    auto tally = [&](int id, const std::vector<std::uint8_t>& y, DetectorStats& st) {
      if (id < 0) return;
      const Tensor<T>& v = tape.value(id);
      for (int i = 0; i < v.rows; ++i) {
        bool pred = v.at(i, 0) >= static_cast<T>(threshold);
        bool gold = y[static_cast<std::size_t>(i)] != 0;
        if (pred && gold) st.tp += 1;
        else if (pred) st.fp += 1;
        else if (gold) st.fn += 1;
      }
    };
    tally(fp.scores.p_sentence, prep.labels.sentence_labels, rep.det_sentence);
    tally(fp.scores.p_clause, prep.labels.clause_labels, rep.det_clause);
    all_labels.push_back(prep.labels);
  }
  auto [akr_s, akr_c] = compute_akr(all_labels);
  rep.akr_sentence = akr_s;
  rep.akr_clause = akr_c;
  return rep;
}

}  // namespace evidr
