// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// Small composite blocks shared by the model modules: the standard
// feed-forward head (two affine layers with ReLU between, hidden width =
// model hidden size), attention pooling over rows, and a bidirectional GRU
// pass over a sequence.
#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "evidr/params.hpp"
#include "evidr/tape.hpp"

namespace evidr {

inline void register_ffn(auto& store, const std::string& prefix, int in, int hidden, int out) {
  store.add(prefix + ".w1", in, hidden, InitKind::Xavier);
  store.add(prefix + ".b1", 1, hidden, InitKind::Zero);
  store.add(prefix + ".w2", hidden, out, InitKind::Xavier);
  store.add(prefix + ".b2", 1, out, InitKind::Zero);
}

/// y = relu(x W1 + b1) W2 + b2, applied row-wise.
template <typename T>
int ffn(Tape<T>& tape, const ParameterStore<T>& store, BoundParams<T>& bp,
        const std::string& prefix, int x) {
  int h = tape.add(tape.matmul(x, bp.leaf(tape, store, prefix + ".w1")),
                   bp.leaf(tape, store, prefix + ".b1"));
  h = tape.relu(h);
  return tape.add(tape.matmul(h, bp.leaf(tape, store, prefix + ".w2")),
                  bp.leaf(tape, store, prefix + ".b2"));
}

/// Attention pooling with a learned score vector: beta = softmax(rows w),
/// output = beta^T rows, shape (1 x d).
template <typename T>
int summarize(Tape<T>& tape, const ParameterStore<T>& store, BoundParams<T>& bp,
              const std::string& score_name, int rows_id) {
  const Tensor<T>& rows = tape.value(rows_id);
  int scores = tape.matmul(rows_id, bp.leaf(tape, store, score_name));  // (m x 1)
  int beta = tape.softmax(tape.reshape(scores, 1, rows.rows));
  return tape.weighted_sum(beta, rows_id);
}

/// Same pooling with FFN-produced scores (one logit per row).
template <typename T>
int summarize_ffn(Tape<T>& tape, const ParameterStore<T>& store, BoundParams<T>& bp,
                  const std::string& ffn_prefix, int rows_id) {
  const Tensor<T>& rows = tape.value(rows_id);
  int scores = ffn(tape, store, bp, ffn_prefix, rows_id);  // (m x 1)
  int beta = tape.softmax(tape.reshape(scores, 1, rows.rows));
  return tape.weighted_sum(beta, rows_id);
}

inline void register_gru_dir(auto& store, const std::string& prefix, int in, int h) {
  store.add(prefix + ".wx", in, 3 * h, InitKind::Xavier);
  store.add(prefix + ".wh", h, 3 * h, InitKind::Xavier);
  store.add(prefix + ".bx", 1, 3 * h, InitKind::Zero);
  store.add(prefix + ".bh", 1, 3 * h, InitKind::Zero);
}

inline void register_bigru(auto& store, const std::string& prefix, int in, int h) {
  register_gru_dir(store, prefix + ".fwd", in, h);
  register_gru_dir(store, prefix + ".bwd", in, h);
}

namespace detail {

/// One GRU direction over a (L x in) sequence. The x-side projection runs as
/// a single whole-sequence matmul; the recurrence applies the fused cell per
/// step. `order` lists time steps in traversal order; outputs are returned
/// in position order regardless.
template <typename T>
std::vector<int> gru_direction(Tape<T>& tape, const ParameterStore<T>& store, BoundParams<T>& bp,
                               const std::string& prefix, int x, const std::vector<int>& order,
                               int h_size) {
  int xw_all = tape.add(tape.matmul(x, bp.leaf(tape, store, prefix + ".wx")),
                        bp.leaf(tape, store, prefix + ".bx"));
  int wh = bp.leaf(tape, store, prefix + ".wh");
  int bh = bp.leaf(tape, store, prefix + ".bh");
  int h = tape.constant(Tensor<T>(1, h_size));
  std::vector<int> by_position(order.size(), -1);
  for (int t : order) {
    int xw_t = tape.gather_rows(xw_all, {t});
    h = tape.gru_cell(xw_t, h, wh, bh);
    by_position[t] = h;
  }
  return by_position;
}

}  // namespace detail

/// Bidirectional GRU layer: (L x in) -> (L x 2h), forward and backward
/// direction outputs concatenated per position.
template <typename T>
int bigru_layer(Tape<T>& tape, const ParameterStore<T>& store, BoundParams<T>& bp,
                const std::string& prefix, int x, int h_size) {
  const int L = tape.value(x).rows;
  std::vector<int> fwd_order(L), bwd_order(L);
  std::iota(fwd_order.begin(), fwd_order.end(), 0);
  for (int t = 0; t < L; ++t) bwd_order[t] = L - 1 - t;
  auto fwd = detail::gru_direction(tape, store, bp, prefix + ".fwd", x, fwd_order, h_size);
  auto bwd = detail::gru_direction(tape, store, bp, prefix + ".bwd", x, bwd_order, h_size);
  int f = tape.concat_rows(std::move(fwd));
  int b = tape.concat_rows(std::move(bwd));
  return tape.concat_cols({f, b});
}

/// Broadcasts a (1 x d) row to m rows via a constant ones column.
template <typename T>
int repeat_row(Tape<T>& tape, int row_id, int m) {
  Tensor<T> ones(m, 1);
  std::fill(ones.data.begin(), ones.data.end(), T(1));
  return tape.matmul(tape.constant(std::move(ones)), row_id);
}

/// Numerically exact log-sum-exp over a (k x 1) column via a detached max
/// shift: LSE(x) = c + log(sum(exp(x - c))) holds for any constant c.
template <typename T>
int log_sum_exp(Tape<T>& tape, int column_id) {
  const Tensor<T>& v = tape.value(column_id);
  T c = v.data[0];
  for (T x : v.data)
    if (x > c) c = x;
  int shifted = tape.affine(column_id, 1.0, -static_cast<double>(c));
  int s = tape.sum(tape.exp_(shifted));
  return tape.affine(tape.log_clamped(s, 0.0), 1.0, static_cast<double>(c));
}

}  // namespace evidr
