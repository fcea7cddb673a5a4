// Copyright 2026 The Roofer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Small synthetic corpora in the dataset formats, used by the reference
// runs and the sample files under data/toy.
//
// QA: "where does <person> live ?" over a filler paragraph that contains
// "<person> lives in <city> [district]"; the answer is the city (plus the
// optional "district"). The KB holds (<person>, home, <city>) facts.
// Classification: filler sentences containing either "good" (label 1) or
// "bad" (label 0).

#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "roofer/autodiff.hpp"
#include "roofer/dataset.hpp"
#include "roofer/error.hpp"
#include "roofer/kb_store.hpp"

namespace roofer::toy {

namespace detail {

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(ad::uniform01(rng) * static_cast<double>(n));
}

inline std::string word(const char* stem, std::size_t i) { return stem + std::to_string(i); }

inline std::vector<std::string> filler(std::mt19937_64& rng, std::size_t len) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < len; ++i) out.push_back(word("w", pick(rng, 60)));
  return out;
}

inline std::string join(const std::vector<std::string>& tokens) {
  std::string s;
  for (const auto& t : tokens) {
    if (!s.empty()) s += ' ';
    s += t;
  }
  return s;
}

}  // namespace detail

struct QaCorpus {
  std::vector<QaRecord> records;
  std::vector<Triple> triples;
};

inline QaCorpus make_qa(std::size_t n, std::uint64_t seed, std::size_t max_paragraph_tokens = 40) {
  std::mt19937_64 rng(seed);
  QaCorpus out;
  constexpr std::size_t kPeople = 20, kCities = 20;
  std::vector<std::size_t> home(kPeople);
  for (std::size_t p = 0; p < kPeople; ++p) {
    home[p] = detail::pick(rng, kCities);
    out.triples.push_back({detail::word("person", p), "home", detail::word("city", home[p]), p + 1});
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t person = detail::pick(rng, kPeople);
    const bool district = detail::pick(rng, 2) == 1;
    std::vector<std::string> fact{detail::word("person", person), "lives", "in", detail::word("city", home[person])};
    if (district) fact.push_back("district");

    const std::size_t budget = max_paragraph_tokens - fact.size();
    const std::size_t before = detail::pick(rng, budget / 2 + 1);
    const std::size_t after = detail::pick(rng, budget - before + 1);
    std::vector<std::string> tokens = detail::filler(rng, before);
    const std::size_t answer_start = tokens.size() + 3;
    tokens.insert(tokens.end(), fact.begin(), fact.end());
    const std::size_t answer_end = tokens.size() - 1;
    const auto tail = detail::filler(rng, after);
    tokens.insert(tokens.end(), tail.begin(), tail.end());

    QaRecord r;
    r.id = "qa" + std::to_string(i);
    r.question = "where does " + detail::word("person", person) + " live ?";
    r.paragraph = detail::join(tokens);
    r.answer_start = answer_start;
    r.answer_end = answer_end;
    out.records.push_back(std::move(r));
  }
  return out;
}

inline std::vector<ClsRecord> make_cls(std::size_t n, std::uint64_t seed, std::size_t sentence_tokens = 12) {
  std::mt19937_64 rng(seed);
  std::vector<ClsRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    auto tokens = detail::filler(rng, sentence_tokens - 1);
    const std::size_t at = detail::pick(rng, tokens.size() + 1);
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(at), label == 1 ? "good" : "bad");
    ClsRecord r;
    r.id = "cls" + std::to_string(i);
    r.sentence1 = detail::join(tokens);
    r.label = label;
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_qa_jsonl(const std::vector<QaRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const auto& r : records) {
    nlohmann::json j{{"id", r.id}, {"question", r.question}, {"paragraph", r.paragraph}};
    if (r.answer_start) j["answer_start_token"] = *r.answer_start;
    if (r.answer_end) j["answer_end_token"] = *r.answer_end;
    out << j.dump() << '\n';
  }
}

inline void write_cls_jsonl(const std::vector<ClsRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const auto& r : records) {
    nlohmann::json j{{"id", r.id}, {"sentence1", r.sentence1}};
    if (!r.sentence2.empty()) j["sentence2"] = r.sentence2;
    if (r.label) j["label"] = *r.label;
    out << j.dump() << '\n';
  }
}

inline void write_kb(const std::vector<Triple>& triples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const auto& t : triples) out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
}

}  // namespace roofer::toy
