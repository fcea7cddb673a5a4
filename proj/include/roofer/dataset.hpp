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

// Line-delimited JSON datasets and their conversion to model inputs.
//
//   QA:             {"id", "question", "paragraph",
//                    "answer_start_token", "answer_end_token"}   (end inclusive)
//   classification: {"id", "sentence1", "sentence2"?, "label"}
//
// Answer positions index the tokenizer's tokens of the paragraph. Labels are
// optional when preparing inputs for prediction.

#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "roofer/error.hpp"
#include "roofer/kb_store.hpp"
#include "roofer/knowledge.hpp"
#include "roofer/roof_model.hpp"
#include "roofer/tokenizer.hpp"

namespace roofer {

struct QaRecord {
  std::string id;
  std::string question;
  std::string paragraph;
  std::optional<std::size_t> answer_start;
  std::optional<std::size_t> answer_end;
};

struct ClsRecord {
  std::string id;
  std::string sentence1;
  std::string sentence2;
  std::optional<std::size_t> label;
};

namespace detail {

template <class Fn>
void for_each_json_line(const std::string& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      fn(j, line_no);
    } catch (const nlohmann::json::exception& e) {
      throw MalformedLine(line_no, e.what());
    }
  }
}

inline std::string id_of(const nlohmann::json& j, std::size_t line_no) {
  if (!j.contains("id")) return std::to_string(line_no);
  return j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
}

}  // namespace detail

inline std::vector<QaRecord> load_qa_records(const std::string& path, bool require_labels) {
  std::vector<QaRecord> out;
  detail::for_each_json_line(path, [&](const nlohmann::json& j, std::size_t line_no) {
    QaRecord r;
    r.id = detail::id_of(j, line_no);
    r.question = j.at("question").get<std::string>();
    r.paragraph = j.at("paragraph").get<std::string>();
    if (j.contains("answer_start_token")) r.answer_start = j["answer_start_token"].get<std::size_t>();
    if (j.contains("answer_end_token")) r.answer_end = j["answer_end_token"].get<std::size_t>();
    if (require_labels && (!r.answer_start || !r.answer_end)) {
      throw MalformedLine(line_no, "missing answer_start_token/answer_end_token");
    }
    if (r.answer_start && r.answer_end && *r.answer_end < *r.answer_start) {
      throw MalformedLine(line_no, "answer end precedes answer start");
    }
    out.push_back(std::move(r));
  });
  return out;
}

inline std::vector<ClsRecord> load_cls_records(const std::string& path, bool require_labels) {
  std::vector<ClsRecord> out;
  detail::for_each_json_line(path, [&](const nlohmann::json& j, std::size_t line_no) {
    ClsRecord r;
    r.id = detail::id_of(j, line_no);
    r.sentence1 = j.at("sentence1").get<std::string>();
    if (j.contains("sentence2") && !j["sentence2"].is_null()) r.sentence2 = j["sentence2"].get<std::string>();
    if (j.contains("label")) r.label = j["label"].get<std::size_t>();
    if (require_labels && !r.label) throw MalformedLine(line_no, "missing label");
    out.push_back(std::move(r));
  });
  return out;
}

// One model-ready example. Positions are indices into the task sequence.
struct Example {
  std::string id;
  RoofInput input;
  TaskLayout layout;
  std::vector<std::string> paragraph_tokens;
  std::vector<KnowledgeUnit> units;
  bool labeled = false;
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t label = 0;

  std::size_t window_lo() const { return layout.paragraph_begin(); }
  std::size_t window_hi() const { return layout.paragraph_begin() + layout.paragraph_len - 1; }
};

struct PreparedData {
  std::vector<Example> examples;
  std::size_t dropped = 0;  // gold span truncated away or label out of range
};

namespace detail {

inline void attach_knowledge(Example& ex, const KnowledgeBase* kb, const KnowledgeFormat& format,
                             const std::string& match_text, const Vocabulary& vocab, const ModelConfig& cfg) {
  if (kb != nullptr) ex.units = format.units_for(*kb, match_text);
  if (cfg.cached_kb) {
    for (const auto& u : ex.units) ex.input.triples.push_back(build_triple_input(u, vocab, cfg.triple_len));
  } else {
    ex.input.kb = build_kb_input(assemble_knowledge(ex.units), vocab, cfg.seg, cfg.N);
  }
}

}  // namespace detail

inline PreparedData prepare_qa(const std::vector<QaRecord>& records, const Vocabulary& vocab,
                               const KnowledgeBase* kb, const KnowledgeFormat& format, const ModelConfig& cfg) {
  PreparedData out;
  for (const auto& r : records) {
    Example ex;
    ex.id = r.id;
    ex.paragraph_tokens = tokenize(r.paragraph);
    const auto q = vocab.encode(r.question);
    const auto p = vocab.encode(r.paragraph);
    ex.layout = task_layout(q.size(), p.size(), cfg.max_q, cfg.M);
    ex.input.task = build_task_input(q, p, cfg.seg, cfg.max_q, cfg.M);
    if (r.answer_start && r.answer_end) {
      if (*r.answer_end >= ex.layout.paragraph_len) {
        ++out.dropped;
        continue;
      }
      ex.labeled = true;
      ex.start = ex.layout.paragraph_begin() + *r.answer_start;
      ex.end = ex.layout.paragraph_begin() + *r.answer_end;
    }
    detail::attach_knowledge(ex, kb, format, r.paragraph, vocab, cfg);
    out.examples.push_back(std::move(ex));
  }
  return out;
}

inline PreparedData prepare_cls(const std::vector<ClsRecord>& records, const Vocabulary& vocab,
                                const KnowledgeBase* kb, const KnowledgeFormat& format, const ModelConfig& cfg) {
  PreparedData out;
  for (const auto& r : records) {
    Example ex;
    ex.id = r.id;
    const auto a = vocab.encode(r.sentence1);
    const auto b = vocab.encode(r.sentence2);
    ex.layout = task_layout(a.size(), b.size(), cfg.max_q, cfg.M);
    ex.input.task = build_task_input(a, b, cfg.seg, cfg.max_q, cfg.M);
    if (r.label) {
      if (*r.label >= cfg.classes) {
        ++out.dropped;
        continue;
      }
      ex.labeled = true;
      ex.label = *r.label;
    }
    detail::attach_knowledge(ex, kb, format, r.sentence1 + " " + r.sentence2, vocab, cfg);
    out.examples.push_back(std::move(ex));
  }
  return out;
}

}  // namespace roofer
