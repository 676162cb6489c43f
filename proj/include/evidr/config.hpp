// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// Training configuration: defaults, `key = value` file parsing and the
// resolved-config echo that every CLI verb prints.
#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "evidr/common.hpp"

namespace evidr {

struct TrainConfig {
  int hidden_size = 64;
  int reasoning_steps = 3;
  double lambda_sentence = 0.2;
  double lambda_clause = 0.4;
  double lr_model = 5e-5;
  double lr_other = 5e-4;
  double weight_decay = 5e-4;
  int epochs = 12;
  int batch_size = 16;
  double warmup_fraction = 0.06;
  unsigned long long seed = 13;
  int max_expr_terms = 3;
  int expression_cap = 64;
  double grad_clip = 5.0;
  int max_seq_len = 512;
  std::string evidence_combiner = "mean";    // mean | max | product
  std::string sign_gating = "multiplicative";  // multiplicative | masked
  std::string number_node_weight = "pseq";   // pseq | clause
  bool teacher_force_evidence = false;
  bool use_graph = true;
  bool use_evidence_gating = true;
};

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw config_error("invalid boolean '" + v + "' for " + key);
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

}  // namespace detail

/// Applies one `key = value` assignment; unknown keys are configuration
/// errors so typos fail loudly instead of training with defaults.
inline void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value) {
  auto as_int = [&] {
    try {
      std::size_t pos = 0;
      int v = std::stoi(value, &pos);
      if (pos != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw config_error("invalid integer '" + value + "' for " + key);
    }
  };
  auto as_double = [&] {
    try {
      std::size_t pos = 0;
      double v = std::stod(value, &pos);
      if (pos != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      throw config_error("invalid number '" + value + "' for " + key);
    }
  };
  if (key == "hidden_size") cfg.hidden_size = as_int();
  else if (key == "reasoning_steps") cfg.reasoning_steps = as_int();
  else if (key == "lambda_sentence") cfg.lambda_sentence = as_double();
  else if (key == "lambda_clause") cfg.lambda_clause = as_double();
  else if (key == "lr_model") cfg.lr_model = as_double();
  else if (key == "lr_other") cfg.lr_other = as_double();
  else if (key == "weight_decay") cfg.weight_decay = as_double();
  else if (key == "epochs") cfg.epochs = as_int();
  else if (key == "batch_size") cfg.batch_size = as_int();
  else if (key == "warmup_fraction") cfg.warmup_fraction = as_double();
  else if (key == "seed") cfg.seed = static_cast<unsigned long long>(std::stoull(value));
  else if (key == "max_expr_terms") cfg.max_expr_terms = as_int();
  else if (key == "expression_cap") cfg.expression_cap = as_int();
  else if (key == "grad_clip") cfg.grad_clip = as_double();
  else if (key == "max_seq_len") cfg.max_seq_len = as_int();
  else if (key == "evidence_combiner") cfg.evidence_combiner = value;
  else if (key == "sign_gating") cfg.sign_gating = value;
  else if (key == "number_node_weight") cfg.number_node_weight = value;
  else if (key == "teacher_force_evidence") cfg.teacher_force_evidence = detail::parse_bool(value, key);
  else if (key == "use_graph") cfg.use_graph = detail::parse_bool(value, key);
  else if (key == "use_evidence_gating") cfg.use_evidence_gating = detail::parse_bool(value, key);
  else throw config_error("unknown configuration key '" + key + "'");
}

/// Parses a config file of `key = value` lines. `#` starts a comment; blank
/// lines are skipped.
inline TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw file_error("cannot open config file: " + path);
  TrainConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::size_t hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::string body = detail::trim(line);
    if (body.empty()) continue;
    std::size_t eq = body.find('=');
    if (eq == std::string::npos)
      throw config_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    apply_config_entry(cfg, detail::trim(body.substr(0, eq)), detail::trim(body.substr(eq + 1)));
  }
  return cfg;
}

/// Every resolved setting, sorted by key, one per line. Printed at startup so
/// runs are reproducible from their logs.
inline std::string echo_config(const TrainConfig& c) {
  std::map<std::string, std::string> kv;
  auto num = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };
  kv["batch_size"] = std::to_string(c.batch_size);
  kv["epochs"] = std::to_string(c.epochs);
  kv["evidence_combiner"] = c.evidence_combiner;
  kv["expression_cap"] = std::to_string(c.expression_cap);
  kv["grad_clip"] = num(c.grad_clip);
  kv["hidden_size"] = std::to_string(c.hidden_size);
  kv["lambda_clause"] = num(c.lambda_clause);
  kv["lambda_sentence"] = num(c.lambda_sentence);
  kv["lr_model"] = num(c.lr_model);
  kv["lr_other"] = num(c.lr_other);
  kv["max_expr_terms"] = std::to_string(c.max_expr_terms);
  kv["max_seq_len"] = std::to_string(c.max_seq_len);
  kv["number_node_weight"] = c.number_node_weight;
  kv["reasoning_steps"] = std::to_string(c.reasoning_steps);
  kv["seed"] = std::to_string(c.seed);
  kv["sign_gating"] = c.sign_gating;
  kv["teacher_force_evidence"] = c.teacher_force_evidence ? "true" : "false";
  kv["use_evidence_gating"] = c.use_evidence_gating ? "true" : "false";
  kv["use_graph"] = c.use_graph ? "true" : "false";
  kv["warmup_fraction"] = num(c.warmup_fraction);
  kv["weight_decay"] = num(c.weight_decay);
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

}  // namespace evidr
