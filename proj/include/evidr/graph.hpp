// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// Heterogeneous reasoning graph: number, sentence, and clause nodes with
// typed directed edges, evidence-weighted relation-specific message passing,
// and fusion of node states back into the token sequence.
//
// Node order is fixed: numbers in canonical combined order (question
// mentions by token index, then passage mentions), then sentences, then
// clauses. Every ordered pair of distinct number nodes carries exactly one
// of {NumGreater, NumLessEqual}; ties and duplicates fall to NumLessEqual in
// both directions.
#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "evidr/corpus.hpp"
#include "evidr/detector.hpp"
#include "evidr/encoder.hpp"
#include "evidr/nn.hpp"

namespace evidr {

enum class NodeKind { Number, Sentence, Clause };

enum class Relation : int {
  NumGreater = 0,
  NumLessEqual = 1,
  ClauseSameSentence = 2,
  ClauseToSentence = 3,
  SentenceToClause = 4,
  NumberToClause = 5,
  ClauseToNumber = 6,
};
inline constexpr int kNumRelations = 7;

inline const char* relation_name(Relation r) {
  switch (r) {
    case Relation::NumGreater: return "num_greater";
    case Relation::NumLessEqual: return "num_less_equal";
    case Relation::ClauseSameSentence: return "clause_same_sentence";
    case Relation::ClauseToSentence: return "clause_to_sentence";
    case Relation::SentenceToClause: return "sentence_to_clause";
    case Relation::NumberToClause: return "number_to_clause";
    case Relation::ClauseToNumber: return "clause_to_number";
  }
  return "?";
}

struct GraphNode {
  int node_id = 0;
  NodeKind kind = NodeKind::Number;
  bool in_question = false;   // number nodes only
  int token_anchor = -1;      // number nodes: token index within its side
  int span_start = -1, span_end = -1;  // fragment nodes: token span
  int ref_index = -1;         // combined-number index or frag_id
};

struct TypedEdge {
  int src = 0, dst = 0;
  Relation relation = Relation::NumGreater;
};

struct HeteroGraph {
  std::vector<GraphNode> nodes;
  std::vector<TypedEdge> edges;
  // incoming[dst] = (src, relation), sorted by (src, relation)
  std::vector<std::vector<std::pair<int, Relation>>> incoming;

  int count(NodeKind k) const {
    int n = 0;
    for (const auto& node : nodes) n += node.kind == k ? 1 : 0;
    return n;
  }
};

/// Edge rules: number pairs compare by value; clauses of one sentence link
/// both ways; each clause links both ways with its parent sentence; each
/// passage number links both ways with its containing clause. Question
/// numbers get number-number edges only.
inline HeteroGraph build_graph(const Document& doc, const QAInstance& qa) {
  HeteroGraph g;
  struct Num {
    double value;
    int node;
  };
  std::vector<Num> nums;
  auto add_number = [&](const NumberMention& m, bool in_question, int ref) {
    GraphNode n;
    n.node_id = static_cast<int>(g.nodes.size());
    n.kind = NodeKind::Number;
    n.in_question = in_question;
    n.token_anchor = m.token_index;
    n.ref_index = ref;
    nums.push_back({m.value, n.node_id});
    g.nodes.push_back(n);
  };
  int ref = 0;
  for (const auto& m : qa.question_numbers) add_number(m, true, ref++);
  std::vector<int> passage_num_nodes;
  for (const auto& m : doc.numbers) {
    passage_num_nodes.push_back(static_cast<int>(g.nodes.size()));
    add_number(m, false, ref++);
  }
  std::vector<int> sentence_nodes(doc.sentences.size());
  for (const Fragment& f : doc.sentences) {
    GraphNode n;
    n.node_id = static_cast<int>(g.nodes.size());
    n.kind = NodeKind::Sentence;
    n.span_start = f.start;
    n.span_end = f.end;
    n.ref_index = f.frag_id;
    sentence_nodes[f.frag_id] = n.node_id;
    g.nodes.push_back(n);
  }
  std::vector<int> clause_nodes(doc.clauses.size());
  for (const Fragment& f : doc.clauses) {
    GraphNode n;
    n.node_id = static_cast<int>(g.nodes.size());
    n.kind = NodeKind::Clause;
    n.span_start = f.start;
    n.span_end = f.end;
    n.ref_index = f.frag_id;
    clause_nodes[f.frag_id] = n.node_id;
    g.nodes.push_back(n);
  }

  for (std::size_t i = 0; i < nums.size(); ++i)
    for (std::size_t j = 0; j < nums.size(); ++j) {
      if (i == j) continue;
      Relation r = nums[i].value > nums[j].value ? Relation::NumGreater : Relation::NumLessEqual;
      g.edges.push_back({nums[i].node, nums[j].node, r});
    }
  for (const Fragment& s : doc.sentences) {
    std::vector<int> members;
    for (const Fragment& c : doc.clauses)
      if (c.parent_sentence == s.frag_id) members.push_back(clause_nodes[c.frag_id]);
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = 0; j < members.size(); ++j)
        if (i != j) g.edges.push_back({members[i], members[j], Relation::ClauseSameSentence});
  }
  for (const Fragment& c : doc.clauses) {
    g.edges.push_back({clause_nodes[c.frag_id], sentence_nodes[c.parent_sentence],
                       Relation::ClauseToSentence});
    g.edges.push_back({sentence_nodes[c.parent_sentence], clause_nodes[c.frag_id],
                       Relation::SentenceToClause});
  }
  for (std::size_t k = 0; k < doc.numbers.size(); ++k) {
    int cid = clause_of_token(doc, doc.numbers[k].token_index);
    if (cid < 0) continue;
    g.edges.push_back({passage_num_nodes[k], clause_nodes[cid], Relation::NumberToClause});
    g.edges.push_back({clause_nodes[cid], passage_num_nodes[k], Relation::ClauseToNumber});
  }

  g.incoming.resize(g.nodes.size());
  for (const TypedEdge& e : g.edges) g.incoming[e.dst].emplace_back(e.src, e.relation);
  for (auto& in : g.incoming) std::sort(in.begin(), in.end());
  return g;
}

// ---------------------------------------------------------------------------
// Differentiable propagation
// ---------------------------------------------------------------------------

inline void register_graph_params(auto& store, int d_h) {
  store.add("graph.pool", d_h, 1, InitKind::Xavier);
  for (int r = 0; r < kNumRelations; ++r)
    store.add("graph.rel" + std::to_string(r), d_h, d_h, InitKind::Xavier);
  store.add("graph.self", d_h, d_h, InitKind::Xavier);
  store.add("graph.ln.gain", 1, d_h, InitKind::One);
  store.add("graph.ln.bias", 1, d_h, InitKind::Zero);
  register_bigru(store, "graph.gru", d_h, d_h / 2);
}

/// v_i^0: number nodes copy their token row of H_ED; fragment nodes pool
/// their span rows with a shared attention head. Returns (|V| x d_h).
template <typename T>
int init_nodes(Tape<T>& tape, const ParameterStore<T>& store, BoundParams<T>& bp,
               const HeteroGraph& g, int h_ed, const EncodedSequence& enc) {
  std::vector<int> pieces;
  std::vector<int> number_rows;
  for (const GraphNode& n : g.nodes) {
    if (n.kind == NodeKind::Number) {
      number_rows.push_back(n.in_question ? enc.question_row(n.token_anchor)
                                          : enc.passage_row(n.token_anchor));
    } else {
      if (!number_rows.empty()) {
        pieces.push_back(tape.gather_rows(h_ed, number_rows));
        number_rows.clear();
      }
      std::vector<int> rows;
      for (int t = n.span_start; t < n.span_end; ++t) rows.push_back(enc.passage_row(t));
      pieces.push_back(summarize(tape, store, bp, "graph.pool", tape.gather_rows(h_ed, rows)));
    }
  }
  if (!number_rows.empty()) pieces.push_back(tape.gather_rows(h_ed, number_rows));
  return pieces.size() == 1 ? pieces[0] : tape.concat_rows(std::move(pieces));
}

enum class NumberNodeWeight { PSeq, Clause };

inline NumberNodeWeight parse_number_node_weight(const std::string& s) {
  if (s == "pseq") return NumberNodeWeight::PSeq;
  if (s == "clause") return NumberNodeWeight::Clause;
  throw config_error("number_node_weight must be pseq or clause; got '" + s + "'");
}

/// Evidence weight per node, in node order: numbers from p_seq at their
/// token row (question numbers read the exact 1 stored there), or from the
/// containing clause's probability under the alternative source; sentence
/// and clause nodes use their detector outputs directly. Returns (|V| x 1).
template <typename T>
int node_weights(Tape<T>& tape, const HeteroGraph& g, const Document& doc,
                 const EncodedSequence& enc, const EvidenceScores<T>& scores,
                 NumberNodeWeight source) {
  std::vector<int> pieces;
  if (int n_num = g.count(NodeKind::Number); n_num > 0) {
    if (source == NumberNodeWeight::PSeq || scores.p_clause < 0) {
      std::vector<int> rows;
      for (const GraphNode& n : g.nodes)
        if (n.kind == NodeKind::Number)
          rows.push_back(n.in_question ? enc.question_row(n.token_anchor)
                                       : enc.passage_row(n.token_anchor));
      pieces.push_back(tape.gather_rows(scores.p_seq, std::move(rows)));
    } else {
      // Gather from [p_seq; p_clause] stacked: question numbers read their
      // p_seq row, passage numbers their clause probability.
      int stacked = tape.concat_rows({scores.p_seq, scores.p_clause});
      std::vector<int> rows;
      for (const GraphNode& n : g.nodes) {
        if (n.kind != NodeKind::Number) continue;
        if (n.in_question) {
          rows.push_back(enc.question_row(n.token_anchor));
        } else {
          int cid = clause_of_token(doc, n.token_anchor);
          rows.push_back(enc.L + cid);
        }
      }
      pieces.push_back(tape.gather_rows(stacked, std::move(rows)));
    }
  }
  if (scores.p_sentence >= 0) pieces.push_back(scores.p_sentence);
  if (scores.p_clause >= 0) pieces.push_back(scores.p_clause);
  if (pieces.empty()) throw model_error("graph with no nodes");
  return pieces.size() == 1 ? pieces[0] : tape.concat_rows(std::move(pieces));
}

/// One message-passing step: v_hat_i = (1/|N_i|) sum over incoming (j, t) of
/// p_j W^t v_j, then v_i <- ReLU(W_self v_i + v_hat_i).
template <typename T>
int propagate_step(Tape<T>& tape, const ParameterStore<T>& store, BoundParams<T>& bp,
                   const HeteroGraph& g, int states, int weights) {
  const int V = static_cast<int>(g.nodes.size());
  const Tensor<T>& st = tape.value(states);
  int vhat = -1;
  for (int r = 0; r < kNumRelations; ++r) {
    std::vector<int> srcs;
    std::vector<std::vector<int>> dst_map(static_cast<std::size_t>(V));
    for (const TypedEdge& e : g.edges) {
      if (static_cast<int>(e.relation) != r) continue;
      dst_map[e.dst].push_back(static_cast<int>(srcs.size()));
      srcs.push_back(e.src);
    }
    if (srcs.empty()) continue;
    int m = tape.matmul(states, bp.leaf(tape, store, "graph.rel" + std::to_string(r)));
    int rows = tape.gather_rows(m, srcs);
    int w = tape.gather_rows(weights, std::move(srcs));
    int scaled = tape.mul(rows, w);
    int scat = tape.scatter_rows(scaled, std::move(dst_map), V);
    vhat = vhat < 0 ? scat : tape.add(vhat, scat);
  }
  if (vhat < 0) {
    vhat = tape.constant(Tensor<T>(V, st.cols));
  } else {
    Tensor<T> inv_deg(V, 1);
    for (int i = 0; i < V; ++i) {
      std::size_t deg = g.incoming[i].size();
      inv_deg.at(i, 0) = deg ? T(1) / static_cast<T>(deg) : T(0);
    }
    vhat = tape.mul(vhat, tape.constant(std::move(inv_deg)));
  }
  int self = tape.matmul(states, bp.leaf(tape, store, "graph.self"));
  return tape.relu(tape.add(self, vhat));
}

/// Scatter map from node states to sequence rows. A row in several node
/// spans resolves number > clause > sentence; clause spans partition each
/// sentence, so sentence states are fully shadowed by design.
inline std::vector<std::vector<int>> sequence_scatter_map(const HeteroGraph& g,
                                                          const EncodedSequence& enc) {
  std::vector<std::vector<int>> map(static_cast<std::size_t>(enc.L));
  for (const GraphNode& n : g.nodes)
    if (n.kind == NodeKind::Clause)
      for (int t = n.span_start; t < n.span_end && t < enc.Lp; ++t)
        map[enc.passage_row(t)] = {n.node_id};
  for (const GraphNode& n : g.nodes)
    if (n.kind == NodeKind::Number) {
      int row = n.in_question ? enc.question_row(n.token_anchor)
                              : enc.passage_row(n.token_anchor);
      map[row] = {n.node_id};
    }
  return map;
}

/// Full reasoning block: `steps` propagation rounds, node-to-sequence
/// scatter, LN(H_ED + H_R), and a residual BiGRU pass. With use_graph off
/// the node machinery is skipped and H_R is zero.
template <typename T>
int reason_and_fuse(Tape<T>& tape, const ParameterStore<T>& store, BoundParams<T>& bp,
                    const HeteroGraph& g, const Document& doc, const EncodedSequence& enc,
                    int h_ed, const EvidenceScores<T>& scores, int steps,
                    NumberNodeWeight weight_source, bool use_graph, int d_h) {
  int h_r;
  if (use_graph && !g.nodes.empty()) {
    int states = init_nodes(tape, store, bp, g, h_ed, enc);
    int weights = node_weights(tape, g, doc, enc, scores, weight_source);
    for (int s = 0; s < steps; ++s)
      states = propagate_step(tape, store, bp, g, states, weights);
    h_r = tape.scatter_rows(states, sequence_scatter_map(g, enc), enc.L);
  } else {
    h_r = tape.constant(Tensor<T>(enc.L, d_h));
  }
  int fused = tape.layer_norm(tape.add(h_ed, h_r), bp.leaf(tape, store, "graph.ln.gain"),
                              bp.leaf(tape, store, "graph.ln.bias"));
  return tape.add(fused, bigru_layer(tape, store, bp, "graph.gru", fused, d_h / 2));
}

}  // namespace evidr
