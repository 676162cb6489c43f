// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference encoder: token embedding + learned position embedding, a shared
// number-marker embedding summed into numeric positions, then two
// bidirectional GRU layers producing d_h-wide contextual rows over
// [CLS] question [SEP] passage [SEP].
//
// Numeric surfaces are never vocabulary entries: every number token maps to
// the unknown id plus the marker, so the value signal flows through number
// extraction and the graph rather than through memorized surface forms.
#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "evidr/common.hpp"
#include "evidr/corpus.hpp"
#include "evidr/nn.hpp"
#include "evidr/params.hpp"
#include "evidr/tape.hpp"

namespace evidr {

class Vocabulary {
 public:
  static constexpr int kUnk = 0, kCls = 1, kSep = 2, kNumMarker = 3, kReserved = 4;

  int size() const { return kReserved + static_cast<int>(words_.size()); }

  /// Lowercased lookup; numeric surfaces and unknown words map to kUnk.
  int id_of(std::string_view surface) const {
    if (token_number_value(surface)) return kUnk;
    auto it = ids_.find(to_lower(surface));
    return it == ids_.end() ? kUnk : it->second;
  }

  void add_tokens(const std::vector<Token>& tokens) {
    for (const Token& t : tokens) {
      if (token_number_value(t.surface)) continue;
      std::string key = to_lower(t.surface);
      if (ids_.emplace(key, size()).second) words_.push_back(key);
    }
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw file_error("cannot write vocabulary: " + path);
    out << "evidr-vocab 1\n";
    for (const std::string& w : words_) out << w << "\n";
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw file_error("cannot open vocabulary: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "evidr-vocab 1")
      throw parse_error("bad vocabulary header in " + path);
    Vocabulary v;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (v.ids_.emplace(line, v.size()).second) v.words_.push_back(line);
    }
    return v;
  }

 private:
  std::map<std::string, int> ids_;
  std::vector<std::string> words_;
};

inline std::string vocab_sidecar_path(const std::string& ckpt_path) {
  return ckpt_path + ".vocab";
}

struct EncodedSequence {
  int h = -1;  // tape id of the (L x d_h) representation
  int L = 0, Lq = 0, Lp = 0;
  int cls_row = 0;
  int q_begin = 0, q_end = 0;  // question rows [q_begin, q_end)
  int sep_row = 0;
  int p_begin = 0, p_end = 0;  // passage rows [p_begin, p_end)
  int end_row = 0;

  int question_row(int tok) const { return q_begin + tok; }
  int passage_row(int tok) const { return p_begin + tok; }
};

inline void register_encoder_params(auto& store, int d_h, int vocab_size, int max_seq_len) {
  if (d_h % 2 != 0) throw config_error("hidden_size must be even");
  store.add("encoder.word_emb", vocab_size, d_h, InitKind::Xavier);
  store.add("encoder.pos_emb", max_seq_len, d_h, InitKind::Xavier);
  register_bigru(store, "encoder.l1", d_h, d_h / 2);
  register_bigru(store, "encoder.l2", d_h, d_h / 2);
}

template <typename T>
EncodedSequence encode(Tape<T>& tape, const ParameterStore<T>& store, BoundParams<T>& bp,
                       const Vocabulary& vocab, const std::vector<Token>& question,
                       const std::vector<Token>& passage, int d_h, int max_seq_len) {
  EncodedSequence enc;
  enc.Lq = static_cast<int>(question.size());
  enc.Lp = static_cast<int>(passage.size());
  enc.L = enc.Lq + enc.Lp + 3;
  if (enc.L > max_seq_len)
    throw model_error("sequence length " + std::to_string(enc.L) + " exceeds max " +
                      std::to_string(max_seq_len) +
                      "; truncate the passage tail before encoding (never the question)");
  enc.cls_row = 0;
  enc.q_begin = 1;
  enc.q_end = 1 + enc.Lq;
  enc.sep_row = enc.q_end;
  enc.p_begin = enc.sep_row + 1;
  enc.p_end = enc.p_begin + enc.Lp;
  enc.end_row = enc.p_end;

  std::vector<int> ids(static_cast<std::size_t>(enc.L), Vocabulary::kUnk);
  Tensor<T> marker_sel(enc.L, 1);
  ids[enc.cls_row] = Vocabulary::kCls;
  ids[enc.sep_row] = Vocabulary::kSep;
  ids[enc.end_row] = Vocabulary::kSep;
  for (int t = 0; t < enc.Lq; ++t) {
    ids[enc.q_begin + t] = vocab.id_of(question[t].surface);
    if (token_number_value(question[t].surface)) marker_sel.at(enc.q_begin + t, 0) = T(1);
  }
  for (int t = 0; t < enc.Lp; ++t) {
    ids[enc.p_begin + t] = vocab.id_of(passage[t].surface);
    if (token_number_value(passage[t].surface)) marker_sel.at(enc.p_begin + t, 0) = T(1);
  }

  int word_emb = bp.leaf(tape, store, "encoder.word_emb");
  int pos_emb = bp.leaf(tape, store, "encoder.pos_emb");
  int word_rows = tape.gather_rows(word_emb, ids);
  std::vector<int> positions(static_cast<std::size_t>(enc.L));
  for (int i = 0; i < enc.L; ++i) positions[i] = i;
  int pos_rows = tape.gather_rows(pos_emb, std::move(positions));
  int marker_row = tape.gather_rows(word_emb, {Vocabulary::kNumMarker});
  int marker_mat = tape.matmul(tape.constant(std::move(marker_sel)), marker_row);

  int x = tape.add(tape.add(word_rows, pos_rows), marker_mat);
  x = bigru_layer(tape, store, bp, "encoder.l1", x, d_h / 2);
  x = bigru_layer(tape, store, bp, "encoder.l2", x, d_h / 2);
  enc.h = x;
  return enc;
}

}  // namespace evidr
