// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// Rendering of evaluation reports: human-readable text, JSON, and the
// per-instance predictions JSONL sidecar.
#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

#include "evidr/evaluation.hpp"
#include "evidr/supervision.hpp"

namespace evidr {

inline std::string report_to_text(const EvalReport& r) {
  std::string out;
  char line[160];
  auto add = [&](const char* fmt, auto... args) {
    std::snprintf(line, sizeof(line), fmt, args...);
    out += line;
    out += '\n';
  };
  add("instances  %d", r.total);
  add("overall    EM %6.2f  F1 %6.2f", r.em(), r.f1());
  for (const char* name : {"number", "date", "span", "count"}) {
    auto it = r.per_type.find(name);
    BucketStats b = it == r.per_type.end() ? BucketStats{} : it->second;
    add("%-10s EM %6.2f  F1 %6.2f  (n=%d)", name, b.em(), b.f1(), b.count);
  }
  add("detector sentence  P %6.2f  R %6.2f  F1 %6.2f", r.det_sentence.precision(),
      r.det_sentence.recall(), r.det_sentence.f1());
  add("detector clause    P %6.2f  R %6.2f  F1 %6.2f", r.det_clause.precision(),
      r.det_clause.recall(), r.det_clause.f1());
  add("keep ratio %%       sentence %6.2f  clause %6.2f", r.akr_sentence, r.akr_clause);
  return out;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["instances"] = r.total;
  j["em"] = r.em();
  j["f1"] = r.f1();
  for (const char* name : {"number", "date", "span", "count"}) {
    auto it = r.per_type.find(name);
    BucketStats b = it == r.per_type.end() ? BucketStats{} : it->second;
    j["per_type"][name] = {{"em", b.em()}, {"f1", b.f1()}, {"count", b.count}};
  }
  auto det = [](const DetectorStats& d) {
    return nlohmann::json{{"precision", d.precision()},
                          {"recall", d.recall()},
                          {"f1", d.f1()},
                          {"tp", d.tp},
                          {"fp", d.fp},
                          {"fn", d.fn}};
  };
  j["detector"]["sentence"] = det(r.det_sentence);
  j["detector"]["clause"] = det(r.det_clause);
  j["keep_ratio"]["sentence"] = r.akr_sentence;
  j["keep_ratio"]["clause"] = r.akr_clause;
  return j;
}

/// One JSON object per line: query id, predicted type, answers, gold, scores.
inline void write_predictions_jsonl(const std::string& path, const EvalReport& r) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw file_error("cannot write predictions: " + path);
  for (const InstanceEval& rec : r.records) {
    nlohmann::json j;
    j["query_id"] = rec.query_id;
    j["predicted_type"] = answer_type_name(rec.predicted_type);
    j["answers"] = rec.answers;
    j["gold"] = rec.gold;
    j["bucket"] = rec.bucket;
    j["em"] = rec.em;
    j["f1"] = rec.f1;
    out << j.dump() << "\n";
  }
}

/// `<stem>.predictions.jsonl` beside the report file.
inline std::string predictions_sidecar_path(const std::string& report_path) {
  std::size_t dot = report_path.find_last_of('.');
  std::size_t slash = report_path.find_last_of('/');
  std::string stem = (dot == std::string::npos || (slash != std::string::npos && dot < slash))
                         ? report_path
                         : report_path.substr(0, dot);
  return stem + ".predictions.jsonl";
}

}  // namespace evidr
