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

// Triple knowledge base: loading, head index, and string-match selection.
//
// A KB file holds one triple per line as three TAB-separated fields
// (head, relation, tail). Lines that are blank after trimming are skipped.
// A triple is selected for a paragraph when its head occurs in the paragraph
// (No_Tail), or when both head and tail occur (Has_Tail). Matching is an
// ASCII case-folded substring test on the raw text.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "roofer/error.hpp"

namespace roofer {

struct Triple {
  std::string head;
  std::string relation;
  std::string tail;
  std::size_t source_line = 0;  // 1-based line in the KB file

  friend bool operator==(const Triple& a, const Triple& b) = default;
};

enum class SelectionMode { NoTail, HasTail };

namespace detail {

inline std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Bytewise ASCII lowering; UTF-8 continuation bytes are never ASCII, so
// multi-byte sequences pass through untouched.
inline std::string fold_case(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace detail

class KnowledgeBase {
 public:
  KnowledgeBase() = default;

  explicit KnowledgeBase(std::vector<Triple> triples) : triples_(std::move(triples)) {
    for (std::size_t i = 0; i < triples_.size(); ++i) {
      head_index_[triples_[i].head].push_back(i);
    }
  }

  const std::vector<Triple>& triples() const { return triples_; }
  const std::map<std::string, std::vector<std::size_t>>& head_index() const {
    return head_index_;
  }
  std::size_t size() const { return triples_.size(); }

 private:
  std::vector<Triple> triples_;
  std::map<std::string, std::vector<std::size_t>> head_index_;
};

inline KnowledgeBase parse_kb(std::istream& in) {
  std::vector<Triple> triples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;

    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() != 3) {
      throw MalformedLine(line_no, "expected 3 tab-separated fields, got " +
                                       std::to_string(fields.size()));
    }
    Triple t{std::string(detail::trim(fields[0])), std::string(detail::trim(fields[1])),
             std::string(detail::trim(fields[2])), line_no};
    if (t.head.empty() || t.relation.empty() || t.tail.empty()) {
      throw MalformedLine(line_no, "empty field");
    }
    triples.push_back(std::move(t));
  }
  if (triples.empty()) throw EmptyKb("knowledge base has no triples");
  return KnowledgeBase(std::move(triples));
}

inline KnowledgeBase load_kb(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open knowledge base '" + path + "'");
  return parse_kb(in);
}

// Returns the triples relevant to `paragraph`, ordered by the position of the
// first head occurrence, ties broken by file order, capped at max_triples.
inline std::vector<Triple> select_triples(const KnowledgeBase& kb, std::string_view paragraph,
                                          SelectionMode mode, std::size_t max_triples) {
  const std::string text = detail::fold_case(paragraph);
  std::vector<std::pair<std::size_t, std::size_t>> hits;  // (match pos, triple index)

  for (const auto& [head, indices] : kb.head_index()) {
    const auto pos = text.find(detail::fold_case(head));
    if (pos == std::string::npos) continue;
    for (std::size_t idx : indices) {
      if (mode == SelectionMode::HasTail &&
          text.find(detail::fold_case(kb.triples()[idx].tail)) == std::string::npos) {
        continue;
      }
      hits.emplace_back(pos, idx);
    }
  }
  std::sort(hits.begin(), hits.end());
  if (hits.size() > max_triples) hits.resize(max_triples);

  std::vector<Triple> out;
  out.reserve(hits.size());
  for (const auto& hit : hits) out.push_back(kb.triples()[hit.second]);
  return out;
}

}  // namespace roofer
