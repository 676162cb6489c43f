// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// DROP-format JSON ingestion and emission. Schema: top-level map
// passage_id -> { "passage": str, "qa_pairs": [ { "question", "query_id",
// "answer": { "number": str, "spans": [str], "date": {day,month,year} } } ] }.
#pragma once

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evidr/common.hpp"
#include "evidr/corpus.hpp"

namespace evidr {

struct DatasetEntry {
  Document doc;
  std::vector<QAInstance> instances;
};

struct Dataset {
  std::vector<DatasetEntry> entries;
  int skipped = 0;  // qa_pairs with an unrecognized answer shape

  std::size_t instance_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.instances.size();
    return n;
  }
};

namespace detail {

inline std::optional<AnswerSpec> parse_answer(const nlohmann::json& a) {
  AnswerSpec spec;
  if (a.contains("number")) {
    const auto& num = a["number"];
    std::string surface;
    if (num.is_string())
      surface = num.get<std::string>();
    else if (num.is_number())
      surface = render_number(num.get<double>());
    if (!surface.empty()) {
      spec.kind = AnswerKind::Number;
      try {
        spec.number = std::stod(surface);
      } catch (const std::exception&) {
        return std::nullopt;
      }
      spec.number_surface = surface;
      return spec;
    }
  }
  if (a.contains("spans") && a["spans"].is_array() && !a["spans"].empty()) {
    std::vector<std::string> spans;
    for (const auto& s : a["spans"]) spans.push_back(s.get<std::string>());
    spec.kind = AnswerKind::Spans;
    spec.spans = std::move(spans);
    return spec;
  }
  if (a.contains("date") && a["date"].is_object()) {
    DateAnswer d;
    const auto& j = a["date"];
    if (j.contains("day") && j["day"].is_string()) d.day = j["day"].get<std::string>();
    if (j.contains("month") && j["month"].is_string()) d.month = j["month"].get<std::string>();
    if (j.contains("year") && j["year"].is_string()) d.year = j["year"].get<std::string>();
    if (!d.day.empty() || !d.month.empty() || !d.year.empty()) {
      spec.kind = AnswerKind::Date;
      spec.date = std::move(d);
      return spec;
    }
  }
  return std::nullopt;
}

}  // namespace detail

inline Dataset ingest_drop(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw file_error("cannot open data file: " + path);
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error("malformed DROP JSON in " + path + ": " + e.what());
  }
  if (!root.is_object()) throw parse_error("DROP JSON root must be an object: " + path);

  Dataset ds;
  for (const auto& [passage_id, body] : root.items()) {
    try {
      DatasetEntry entry;
      entry.doc = make_document(passage_id, body.at("passage").get<std::string>());
      if (body.contains("qa_pairs")) {
        for (const auto& qa : body["qa_pairs"]) {
          auto spec = detail::parse_answer(qa.at("answer"));
          if (!spec) {
            ++ds.skipped;
            continue;
          }
          entry.instances.push_back(make_instance(qa.at("query_id").get<std::string>(),
                                                  qa.at("question").get<std::string>(),
                                                  std::move(*spec)));
        }
      }
      ds.entries.push_back(std::move(entry));
    } catch (const nlohmann::json::exception& e) {
      throw parse_error("malformed DROP JSON for passage '" + passage_id + "': " + e.what());
    }
  }
  return ds;
}

/// Emits the same schema ingest_drop reads; keys are sorted, so output for a
/// given dataset is byte-stable.
inline void write_drop_json(const std::string& path, const Dataset& ds) {
  nlohmann::json root = nlohmann::json::object();
  for (const auto& entry : ds.entries) {
    nlohmann::json passage;
    passage["passage"] = entry.doc.text;
    passage["qa_pairs"] = nlohmann::json::array();
    for (const auto& qa : entry.instances) {
      nlohmann::json j;
      j["question"] = qa.question;
      j["query_id"] = qa.query_id;
      nlohmann::json ans;
      switch (qa.gold.kind) {
        case AnswerKind::Number:
          ans["number"] = qa.gold.number_surface ? *qa.gold.number_surface
                                                 : render_number(*qa.gold.number);
          ans["spans"] = nlohmann::json::array();
          break;
        case AnswerKind::Spans:
          ans["number"] = "";
          ans["spans"] = *qa.gold.spans;
          break;
        case AnswerKind::Date:
          ans["number"] = "";
          ans["spans"] = nlohmann::json::array();
          ans["date"] = {{"day", qa.gold.date->day},
                         {"month", qa.gold.date->month},
                         {"year", qa.gold.date->year}};
          break;
      }
      j["answer"] = std::move(ans);
      passage["qa_pairs"].push_back(std::move(j));
    }
    root[entry.doc.passage_id] = std::move(passage);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw file_error("cannot write data file: " + path);
  out << root.dump(1) << "\n";
}

}  // namespace evidr
