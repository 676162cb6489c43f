// Copyright (c) 2026 the evidr authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic census-style benchmark generator. Every passage follows the
// same four-sentence shape (population counts, density, a racial-makeup
// enumeration in descending order, housing units) with fresh values, names
// and formatting; questions cover arithmetic, passage span, question span,
// counting and multi-span extraction, with golds computed exactly from the
// generating values.
#pragma once

#include <algorithm>
#include <array>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "evidr/common.hpp"
#include "evidr/corpus.hpp"
#include "evidr/drop_io.hpp"

namespace evidr {

namespace detail {

inline constexpr std::array<const char*, 20> kCities = {
    "Greenville",  "Brookside",  "Fairview",  "Riverton",  "Lakewood",
    "Hillsboro",   "Mapleton",   "Ashford",   "Westbrook", "Northfield",
    "Easton",      "Southgate",  "Kingsport", "Queensbury", "Bridgewater",
    "Stonehill",   "Oakdale",    "Pinecrest", "Elmhurst",  "Cedarville"};

inline constexpr std::array<const char*, 21> kGroups = {
    "White",   "Black",     "Asian",    "Hispanic",         "German",
    "Irish",   "Italian",   "Polish",   "Swedish",          "Norwegian",
    "Dutch",   "French",    "Russian",  "Danish",           "Welsh",
    "Scottish", "Finnish",  "Portuguese", "African American", "Native American",
    "Pacific Islander"};

inline std::string render_int(long v, bool grouped) {
  std::string plain = std::to_string(v);
  if (!grouped) return plain;
  std::string out;
  int count = 0;
  for (std::size_t i = plain.size(); i-- > 0;) {
    out += plain[i];
    if (++count == 3 && i > 0) {
      out += ',';
      count = 0;
    }
  }
  std::reverse(out.begin(), out.end());
  return out;
}

inline std::string render_tenths(int t) {
  return std::to_string(t / 10) + "." + std::to_string(t % 10);
}

/// One generated passage: five racial groups listed by descending share.
struct CensusPassage {
  std::string city;
  int year = 0;
  long people = 0, households = 0, families = 0, housing = 0;
  std::vector<std::string> names;  // descending by share
  std::vector<int> tenths;         // shares in tenths of a percent, descending
  bool grouped = false;
  std::string text;
};

inline CensusPassage make_passage(std::mt19937_64& rng) {
  CensusPassage p;
  p.city = kCities[uniform_below(rng, kCities.size())];
  p.year = 1990 + 10 * static_cast<int>(uniform_below(rng, 3));
  p.people = 5000 + static_cast<long>(uniform_below(rng, 95001));
  p.households = p.people * (35 + static_cast<long>(uniform_below(rng, 25))) / 100;
  p.families = p.households * (55 + static_cast<long>(uniform_below(rng, 35))) / 100;
  // One passage in five has more families than households, so the
  // comparison question has a non-constant answer.
  if (uniform_below(rng, 5) == 0) std::swap(p.households, p.families);
  p.housing = std::max(p.households, p.families) + 200 + static_cast<long>(uniform_below(rng, 3001));
  int d1 = 1000 + static_cast<int>(uniform_below(rng, 9000));
  int d2 = 1000 + static_cast<int>(uniform_below(rng, 9000));
  p.grouped = uniform_below(rng, 2) == 1;

  std::vector<int> pool(kGroups.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<int>(i);
  for (int k = 0; k < 5; ++k) {
    std::size_t j = k + uniform_below(rng, pool.size() - k);
    std::swap(pool[k], pool[j]);
    p.names.push_back(kGroups[pool[k]]);
  }
  // Majority share 45.0-89.9; minors are capped so the five shares sum below
  // 100%. All distinct, none a whole percent (whole-number shares would
  // collide with count-style golds).
  std::set<int> used;
  p.tenths.push_back(450 + static_cast<int>(uniform_below(rng, 450)));
  const int minor_max = (999 - p.tenths[0]) / 4;
  while (p.tenths.size() < 5) {
    int t = 3 + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(minor_max - 2)));
    if (t % 10 == 0 || !used.insert(t).second) continue;
    p.tenths.push_back(t);
  }
  std::sort(p.tenths.begin() + 1, p.tenths.end(), std::greater<int>());

  std::string s;
  s += "As of the census of " + std::to_string(p.year) + ", there were " +
       render_int(p.people, p.grouped) + " people, " + render_int(p.households, p.grouped) +
       " households, and " + render_int(p.families, p.grouped) + " families residing in " +
       p.city + ".";
  s += " The population density was " + render_tenths(d1) + " inhabitants per square mile.";
  s += " The racial makeup of the city was ";
  for (int k = 0; k < 5; ++k) {
    if (k == 4)
      s += ", and ";
    else if (k > 0)
      s += ", ";
    s += render_tenths(p.tenths[static_cast<std::size_t>(k)]) + "% " +
         p.names[static_cast<std::size_t>(k)];
  }
  s += ".";
  s += " There were " + render_int(p.housing, p.grouped) +
       " housing units at an average density of " + render_tenths(d2) + " per square mile.";
  p.text = std::move(s);
  return p;
}

inline AnswerSpec number_answer(double value, std::string surface) {
  AnswerSpec a;
  a.kind = AnswerKind::Number;
  a.number = value;
  a.number_surface = std::move(surface);
  return a;
}

inline AnswerSpec span_answer(std::vector<std::string> spans) {
  AnswerSpec a;
  a.kind = AnswerKind::Spans;
  a.spans = std::move(spans);
  return a;
}

}  // namespace detail

/// Appends passages to `ds` until it reaches `instance_count` instances.
/// Three questions per passage: an arithmetic form, a lookup/superlative
/// form, and one of comparison, count, or multi-span, all cycled so the
/// type mix stays balanced.
inline void synthesize_into(Dataset& ds, std::mt19937_64& rng, int instance_count,
                            const std::string& prefix) {
  int made = static_cast<int>(ds.instance_count());
  int pi = static_cast<int>(ds.entries.size());
  while (made < instance_count) {
    detail::CensusPassage p = detail::make_passage(rng);
    std::string pid = prefix + "_p" + std::to_string(pi);
    DatasetEntry entry;
    entry.doc = make_document(pid, p.text);
    auto add = [&](int slot, const std::string& question, AnswerSpec gold) {
      entry.instances.push_back(
          make_instance(pid + "_q" + std::to_string(slot), question, std::move(gold)));
    };

    if (pi % 2 == 0) {
      std::size_t i = uniform_below(rng, 4);
      std::size_t j = i + 1 + uniform_below(rng, 4 - i);
      int diff = p.tenths[i] - p.tenths[j];
      add(0,
          "How many more percent of the population was " + p.names[i] + " than " + p.names[j] +
              "?",
          detail::number_answer(diff / 10.0, detail::render_tenths(diff)));
    } else {
      long big, small;
      std::string big_name, small_name;
      if (uniform_below(rng, 2) == 0) {
        big = p.people;
        big_name = "people";
        small = std::min(p.households, p.families);
        small_name = p.households <= p.families ? "households" : "families";
      } else if (p.households > p.families) {
        big = p.households;
        big_name = "households";
        small = p.families;
        small_name = "families";
      } else {
        big = p.families;
        big_name = "families";
        small = p.households;
        small_name = "households";
      }
      add(0,
          "How many more " + big_name + " than " + small_name + " were there in " + p.city + "?",
          detail::number_answer(static_cast<double>(big - small), std::to_string(big - small)));
    }

    switch (pi % 3) {
      case 0: {
        std::size_t k = uniform_below(rng, 5);
        add(1, "Which group made up " + detail::render_tenths(p.tenths[k]) +
                   "% of the population?",
            detail::span_answer({p.names[k]}));
        break;
      }
      case 1: {
        std::size_t k = uniform_below(rng, 5);
        add(1, "What percent of the population was " + p.names[k] + "?",
            detail::number_answer(p.tenths[k] / 10.0, detail::render_tenths(p.tenths[k])));
        break;
      }
      default: {
        bool smallest = uniform_below(rng, 2) == 0;
        add(1, std::string("What was the ") + (smallest ? "smallest" : "largest") +
                   " racial group?",
            detail::span_answer({p.names[smallest ? 4 : 0]}));
        break;
      }
    }

    switch ((pi / 3) % 3) {
      case 0:
        add(2, "Were there more households or families in " + p.city + "?",
            detail::span_answer({p.households > p.families ? "households" : "families"}));
        break;
      case 1: {
        int k = static_cast<int>(uniform_below(rng, 6));
        int t;
        if (k == 0)
          t = p.tenths[0] + 1 + static_cast<int>(uniform_below(rng, 999 - p.tenths[0]));
        else if (k == 5)
          t = std::max(1, p.tenths[4] - 1 - static_cast<int>(uniform_below(rng, 2)));
        else
          t = p.tenths[static_cast<std::size_t>(k)];
        add(2, "How many racial groups made up more than " + detail::render_tenths(t) +
                   "% of the population?",
            detail::number_answer(static_cast<double>(k), std::to_string(k)));
        break;
      }
      default: {
        std::size_t k = uniform_below(rng, 5);
        std::vector<std::string> others;
        for (std::size_t g = 0; g < 5; ++g)
          if (g != k) others.push_back(p.names[g]);
        add(2, "Which racial groups other than " + p.names[k] +
                   " made up part of the population?",
            detail::span_answer(std::move(others)));
        break;
      }
    }

    while (made + static_cast<int>(entry.instances.size()) > instance_count)
      entry.instances.pop_back();
    made += static_cast<int>(entry.instances.size());
    ds.entries.push_back(std::move(entry));
    ++pi;
  }
}

/// Train and dev splits from one seed; the dev stream continues where the
/// train stream stopped, so the splits never share a passage.
inline std::pair<Dataset, Dataset> synthesize_splits(std::uint64_t seed, int train_count,
                                                     int dev_count) {
  std::mt19937_64 rng(seed * kSeedMix ^ fnv1a64("synth"));
  Dataset train, dev;
  synthesize_into(train, rng, train_count, "train");
  synthesize_into(dev, rng, dev_count, "dev");
  return {std::move(train), std::move(dev)};
}

}  // namespace evidr
