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

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "roofer/error.hpp"
#include "roofer/kb_store.hpp"

namespace roofer {

enum class ExpansionType { Exp0, Exp1, Exp2 };

// Rendering choices for one language. Exp1 text is
//   head + connector_1 + relation + connector_2 + tail
// which yields "head is a relation of tail" for the English preset and
// head 的 relation 是 tail for the Chinese preset.
struct VerbalizerConfig {
  std::string connector_1;
  std::string connector_2;
  std::string pronoun;
  std::string preset;
  std::string exp0_joiner;      // between fields of an Exp0 unit
  std::string merge_separator;  // between facts merged by Exp2

  static VerbalizerConfig english() {
    return {" is a ", " of ", "it", "en", " ", ", "};
  }
  static VerbalizerConfig chinese() {
    return {"\xE7\x9A\x84", "\xE6\x98\xAF", "\xE5\xAE\x83", "zh", "", "\xEF\xBC\x8C"};
  }
  static VerbalizerConfig preset_named(const std::string& name) {
    if (name == "en") return english();
    if (name == "zh") return chinese();
    throw InvalidConfig("unknown verbalizer preset '" + name + "'");
  }
};

struct KnowledgeUnit {
  std::string text;
  std::vector<Triple> source_triples;
};

// Verbalizes triples in order. Exp0 and Exp1 emit one unit per triple; Exp2
// folds a triple into the preceding unit when both share a head, replacing
// the repeated head with the configured pronoun.
inline std::vector<KnowledgeUnit> expand(const std::vector<Triple>& triples, ExpansionType type,
                                         const VerbalizerConfig& cfg) {
  std::vector<KnowledgeUnit> units;
  units.reserve(triples.size());
  for (const Triple& t : triples) {
    if (type == ExpansionType::Exp0) {
      units.push_back({t.head + cfg.exp0_joiner + t.relation + cfg.exp0_joiner + t.tail, {t}});
      continue;
    }
    const bool merge = type == ExpansionType::Exp2 && !units.empty() &&
                       units.back().source_triples.front().head == t.head;
    if (merge) {
      KnowledgeUnit& prev = units.back();
      prev.text += cfg.merge_separator + cfg.pronoun + cfg.connector_1 + t.relation +
                   cfg.connector_2 + t.tail;
      prev.source_triples.push_back(t);
    } else {
      units.push_back(
          {t.head + cfg.connector_1 + t.relation + cfg.connector_2 + t.tail, {t}});
    }
  }
  return units;
}

// Unit texts in order; a SEP token follows every unit when tokenized.
struct AssembledKnowledge {
  std::vector<std::string> units;

  std::size_t boundary_count() const { return units.size(); }

  std::string render(const std::string& sep = "[SEP]") const {
    std::string out;
    for (const auto& u : units) {
      if (!out.empty()) out += ' ';
      out += u + ' ' + sep;
    }
    return out;
  }
};

inline AssembledKnowledge assemble_knowledge(const std::vector<KnowledgeUnit>& units) {
  AssembledKnowledge out;
  out.units.reserve(units.size());
  for (const auto& u : units) out.units.push_back(u.text);
  return out;
}

}  // namespace roofer
