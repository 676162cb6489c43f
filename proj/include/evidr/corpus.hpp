// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// Text side of the pipeline: tokens, fragments (sentences and clauses),
// number mentions, and the document/question containers everything else
// consumes. All functions here are pure.
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evidr/common.hpp"

namespace evidr {

struct Token {
  std::string surface;
  int char_start = 0;  // offsets into the source text, [char_start, char_end)
  int char_end = 0;
  int seq_index = 0;
};

enum class FragLevel { Sentence, Clause };

struct Fragment {
  int frag_id = 0;
  FragLevel level = FragLevel::Sentence;
  int start = 0;  // token span [start, end)
  int end = 0;
  int parent_sentence = -1;  // frag_id of the parent, clauses only
};

struct NumberMention {
  int token_index = 0;
  double value = 0.0;
  std::string surface;
};

struct Document {
  std::string passage_id;
  std::string text;
  std::vector<Token> tokens;
  std::vector<Fragment> sentences;
  std::vector<Fragment> clauses;
  std::vector<NumberMention> numbers;
};

enum class AnswerKind { Number, Spans, Date };

struct DateAnswer {
  std::string day, month, year;
};

struct AnswerSpec {
  AnswerKind kind = AnswerKind::Spans;
  std::optional<double> number;
  std::optional<std::string> number_surface;  // verbatim string from the data
  std::optional<std::vector<std::string>> spans;
  std::optional<DateAnswer> date;
};

struct QAInstance {
  std::string query_id;
  std::string question;
  std::vector<Token> question_tokens;
  std::vector<NumberMention> question_numbers;
  AnswerSpec gold;
};

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_word_byte(unsigned char c) {
  return is_ascii_alpha(static_cast<char>(c)) || c >= 0x80;
}

// Length of a numeric token starting at i, or 0. Accepts digits, commas
// followed by digits, one decimal point followed by a digit, and one
// trailing percent sign.
inline std::size_t numeric_token_length(std::string_view s, std::size_t i) {
  std::size_t j = i;
  if (j >= s.size() || !is_ascii_digit(s[j])) return 0;
  while (j < s.size() && is_ascii_digit(s[j])) ++j;
  while (j + 1 < s.size() && s[j] == ',' && is_ascii_digit(s[j + 1])) {
    ++j;
    while (j < s.size() && is_ascii_digit(s[j])) ++j;
  }
  if (j + 1 < s.size() && s[j] == '.' && is_ascii_digit(s[j + 1])) {
    ++j;
    while (j < s.size() && is_ascii_digit(s[j])) ++j;
  }
  if (j < s.size() && s[j] == '%') ++j;
  return j - i;
}

}  // namespace detail

/// Whitespace and punctuation splitting. Numeric surfaces (digits, comma
/// groups, decimal part, trailing %) stay single tokens; words keep internal
/// apostrophes; any other byte is a one-character token.
inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto push = [&](std::size_t start, std::size_t end) {
    Token t;
    t.surface = std::string(text.substr(start, end - start));
    t.char_start = static_cast<int>(start);
    t.char_end = static_cast<int>(end);
    t.seq_index = static_cast<int>(out.size());
    out.push_back(std::move(t));
  };
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      ++i;
      continue;
    }
    if (std::size_t n = detail::numeric_token_length(text, i); n > 0) {
      push(i, i + n);
      i += n;
      continue;
    }
    if (detail::is_word_byte(c)) {
      std::size_t j = i;
      while (j < text.size()) {
        unsigned char w = static_cast<unsigned char>(text[j]);
        if (detail::is_word_byte(w)) {
          ++j;
        } else if (w == '\'' && j > i && j + 1 < text.size() &&
                   detail::is_word_byte(static_cast<unsigned char>(text[j + 1]))) {
          ++j;
        } else {
          break;
        }
      }
      push(i, j);
      i = j;
      continue;
    }
    push(i, i + 1);
    ++i;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

inline bool is_sentence_terminal(std::string_view surface) {
  return surface == "." || surface == "!" || surface == "?";
}

inline bool is_clause_delimiter(std::string_view surface) {
  return surface == "," || surface == ";";
}

inline bool is_coordinating_conjunction(std::string_view surface) {
  std::string s = to_lower(surface);
  return s == "and" || s == "but" || s == "or";
}

/// Sentences split after terminal punctuation tokens; clauses split within a
/// sentence after commas/semicolons and before {and, but, or} when the
/// conjunction is followed by at least three tokens of the same sentence.
/// A sentence with no internal split yields one clause equal to itself.
inline void segment(const std::vector<Token>& tokens, std::vector<Fragment>& sentences,
                    std::vector<Fragment>& clauses) {
  sentences.clear();
  clauses.clear();
  const int n = static_cast<int>(tokens.size());
  int start = 0;
  for (int i = 0; i < n; ++i) {
    bool terminal = is_sentence_terminal(tokens[i].surface);
    if (terminal || i == n - 1) {
      Fragment s;
      s.frag_id = static_cast<int>(sentences.size());
      s.level = FragLevel::Sentence;
      s.start = start;
      s.end = i + 1;
      sentences.push_back(s);
      start = i + 1;
    }
  }
  for (const Fragment& s : sentences) {
    int cstart = s.start;
    auto close = [&](int cend) {  // [cstart, cend), skipped when empty
      if (cend <= cstart) return;
      Fragment c;
      c.frag_id = static_cast<int>(clauses.size());
      c.level = FragLevel::Clause;
      c.start = cstart;
      c.end = cend;
      c.parent_sentence = s.frag_id;
      clauses.push_back(c);
      cstart = cend;
    };
    for (int i = s.start; i < s.end; ++i) {
      if (is_clause_delimiter(tokens[i].surface)) {
        close(i + 1);
      } else if (i > cstart && is_coordinating_conjunction(tokens[i].surface) &&
                 s.end - i - 1 >= 3) {
        close(i);
      }
    }
    close(s.end);
  }
}

// ---------------------------------------------------------------------------
// Number extraction
// ---------------------------------------------------------------------------

/// Spelled-out cardinals zero through ten.
inline std::optional<double> parse_number_word(std::string_view tok) {
  static const char* words[] = {"zero", "one", "two",   "three", "four", "five",
                                "six",  "seven", "eight", "nine",  "ten"};
  std::string s = to_lower(tok);
  for (int i = 0; i <= 10; ++i)
    if (s == words[i]) return static_cast<double>(i);
  return std::nullopt;
}

/// Numeric value of a token surface: digit forms (with comma grouping and an
/// optional trailing %, which is dropped without rescaling) and word
/// cardinals zero..ten.
inline std::optional<double> token_number_value(std::string_view surface) {
  std::string_view s = surface;
  if (!s.empty() && s.back() == '%') s.remove_suffix(1);
  if (auto v = parse_number_token(s)) return v;
  return parse_number_word(surface);
}

inline std::vector<NumberMention> extract_numbers(const std::vector<Token>& tokens) {
  std::vector<NumberMention> out;
  for (const Token& t : tokens) {
    if (auto v = token_number_value(t.surface)) {
      NumberMention m;
      m.token_index = t.seq_index;
      m.value = *v;
      m.surface = t.surface;
      out.push_back(std::move(m));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assembly helpers
// ---------------------------------------------------------------------------

inline Document make_document(std::string passage_id, std::string text) {
  Document d;
  d.passage_id = std::move(passage_id);
  d.text = std::move(text);
  d.tokens = tokenize(d.text);
  segment(d.tokens, d.sentences, d.clauses);
  d.numbers = extract_numbers(d.tokens);
  return d;
}

inline QAInstance make_instance(std::string query_id, std::string question, AnswerSpec gold) {
  QAInstance qa;
  qa.query_id = std::move(query_id);
  qa.question = std::move(question);
  qa.question_tokens = tokenize(qa.question);
  qa.question_numbers = extract_numbers(qa.question_tokens);
  qa.gold = std::move(gold);
  return qa;
}

/// Sentence and clause ids containing a passage token, or -1.
inline int sentence_of_token(const Document& d, int tok) {
  for (const Fragment& f : d.sentences)
    if (tok >= f.start && tok < f.end) return f.frag_id;
  return -1;
}

inline int clause_of_token(const Document& d, int tok) {
  for (const Fragment& f : d.clauses)
    if (tok >= f.start && tok < f.end) return f.frag_id;
  return -1;
}

}  // namespace evidr
