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

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "roofer/error.hpp"
#include "roofer/kb_store.hpp"
#include "roofer/tokenizer.hpp"
#include "roofer/verbalizer.hpp"

namespace roofer {

// Selection followed by verbalization: the knowledge format fed to the
// knowledge encoder for one paragraph.
struct KnowledgeFormat {
  SelectionMode selection = SelectionMode::HasTail;
  ExpansionType expansion = ExpansionType::Exp2;
  VerbalizerConfig verbalizer = VerbalizerConfig::english();
  std::size_t max_triples = std::numeric_limits<std::size_t>::max();

  std::vector<KnowledgeUnit> units_for(const KnowledgeBase& kb, const std::string& paragraph) const {
    return expand(select_triples(kb, paragraph, selection, max_triples), expansion, verbalizer);
  }
};

// Tokens the knowledge encoder sees for these units before truncation:
// every unit's tokens plus its trailing SEP.
inline std::size_t knowledge_token_count(const std::vector<KnowledgeUnit>& units) {
  std::size_t n = 0;
  for (const auto& u : units) n += tokenize(u.text).size() + 1;
  return n;
}

struct KbStats {
  double mean_tokens = 0.0;
  double mean_triples = 0.0;
};

inline KbStats kb_stats(const KnowledgeBase& kb, const std::vector<std::string>& corpus,
                        const KnowledgeFormat& format) {
  if (corpus.empty()) throw EmptyCorpus("kb_stats needs at least one paragraph");
  double tokens = 0.0;
  double triples = 0.0;
  for (const auto& paragraph : corpus) {
    const auto selected = select_triples(kb, paragraph, format.selection, format.max_triples);
    tokens += static_cast<double>(
        knowledge_token_count(expand(selected, format.expansion, format.verbalizer)));
    triples += static_cast<double>(selected.size());
  }
  const auto n = static_cast<double>(corpus.size());
  return {tokens / n, triples / n};
}

}  // namespace roofer
