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

// Vocabulary and fixed-length encoder inputs.
//
// Text is split on whitespace; every CJK ideograph or CJK punctuation mark
// additionally becomes a token of its own, so unspaced Chinese text is
// tokenized per character.
//
// Layouts (L = configured length):
//   task    CLS q.. SEP p.. SEP PAD..
//   kb      CLS u1.. SEP u2.. SEP .. PAD..
//   triple  CLS u.. SEP PAD..
// Segment ids: [A] = 0, [B] = 1.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "roofer/error.hpp"
#include "roofer/verbalizer.hpp"

namespace roofer {

enum class SegScheme { Type1, Type2 };

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kClsId = 2;
inline constexpr int kSepId = 3;
inline constexpr std::size_t kReservedTokens = 4;

inline const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> tokens{"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  return tokens;
}

namespace detail {

inline bool is_cjk(char32_t cp) {
  return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF) ||
         (cp >= 0x20000 && cp <= 0x2A6DF) || (cp >= 0xF900 && cp <= 0xFAFF) ||
         (cp >= 0x2F800 && cp <= 0x2FA1F) || (cp >= 0x3000 && cp <= 0x303F) ||
         (cp >= 0xFF00 && cp <= 0xFFEF);
}

// Length of the UTF-8 sequence starting with `lead` (1 for invalid bytes).
inline std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

inline char32_t utf8_decode(std::string_view s) {
  const auto b = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
  switch (s.size()) {
    case 2: return ((b(0) & 0x1Fu) << 6) | (b(1) & 0x3Fu);
    case 3: return ((b(0) & 0x0Fu) << 12) | ((b(1) & 0x3Fu) << 6) | (b(2) & 0x3Fu);
    case 4:
      return ((b(0) & 0x07u) << 18) | ((b(1) & 0x3Fu) << 12) | ((b(2) & 0x3Fu) << 6) |
             (b(3) & 0x3Fu);
    default: return b(0);
  }
}

}  // namespace detail

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    const auto lead = static_cast<unsigned char>(text[i]);
    const std::size_t n = std::min(detail::utf8_length(lead), text.size() - i);
    const std::string_view piece = text.substr(i, n);
    if (n == 1 && (lead == ' ' || lead == '\t' || lead == '\n' || lead == '\r' ||
                   lead == '\v' || lead == '\f')) {
      flush();
    } else if (n > 1 && detail::is_cjk(detail::utf8_decode(piece))) {
      flush();
      tokens.emplace_back(piece);
    } else {
      current.append(piece);
    }
    i += n;
  }
  flush();
  return tokens;
}

class Vocabulary {
 public:
  Vocabulary() : id_to_token_(reserved_tokens()) { reindex(); }

  // Throws InvalidArgument unless the first four tokens are the reserved ones
  // and every token is distinct.
  explicit Vocabulary(std::vector<std::string> tokens) : id_to_token_(std::move(tokens)) {
    if (id_to_token_.size() < kReservedTokens ||
        !std::equal(reserved_tokens().begin(), reserved_tokens().end(), id_to_token_.begin())) {
      throw InvalidArgument("vocabulary must start with [PAD] [UNK] [CLS] [SEP]");
    }
    reindex();
    if (token_to_id_.size() != id_to_token_.size()) {
      throw InvalidArgument("vocabulary contains duplicate tokens");
    }
  }

  std::size_t size() const { return id_to_token_.size(); }

  int id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
  }
  bool contains(const std::string& token) const { return token_to_id_.count(token) != 0; }
  const std::string& token(int id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  std::vector<int> encode(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& tok : tokenize(text)) ids.push_back(id(tok));
    return ids;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vocabulary '" + path + "'");
    for (const auto& tok : id_to_token_) out << tok << '\n';
    if (!out) throw IoError("failed writing vocabulary '" + path + "'");
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocabulary '" + path + "'");
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      tokens.push_back(line);
    }
    return Vocabulary(std::move(tokens));
  }

 private:
  void reindex() {
    token_to_id_.clear();
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
      token_to_id_.emplace(id_to_token_[i], static_cast<int>(i));
    }
  }

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

// Keeps the most frequent tokens (ties in lexicographic order) so that the
// vocabulary, reserved tokens included, has at most max_size entries.
inline Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t max_size) {
  if (corpus.empty()) throw EmptyCorpus("cannot build a vocabulary from no text");
  if (max_size < kReservedTokens + 1) throw InvalidArgument("max_size must be at least 5");

  std::map<std::string, std::size_t> counts;
  for (const auto& text : corpus) {
    for (auto& tok : tokenize(text)) ++counts[tok];
  }
  for (const auto& r : reserved_tokens()) counts.erase(r);

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens = reserved_tokens();
  for (const auto& [tok, count] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(tok);
  }
  return Vocabulary(std::move(tokens));
}

struct EncodedSequence {
  std::vector<int> token_ids;
  std::vector<int> segment_ids;
  std::vector<bool> attention_mask;
  std::size_t true_length = 0;

  std::size_t length() const { return token_ids.size(); }
};

namespace detail {

inline EncodedSequence padded(std::size_t length, int pad_segment) {
  EncodedSequence s;
  s.token_ids.assign(length, kPadId);
  s.segment_ids.assign(length, pad_segment);
  s.attention_mask.assign(length, false);
  return s;
}

inline void push(EncodedSequence& s, int id, int segment) {
  s.token_ids[s.true_length] = id;
  s.segment_ids[s.true_length] = segment;
  s.attention_mask[s.true_length] = true;
  ++s.true_length;
}

}  // namespace detail

// Token budget of a task input: the question keeps at most max_q tokens and
// the paragraph whatever remains after CLS and two SEPs.
struct TaskLayout {
  std::size_t question_len = 0;
  std::size_t paragraph_len = 0;

  std::size_t paragraph_begin() const { return question_len + 2; }
};

inline TaskLayout task_layout(std::size_t question_tokens, std::size_t paragraph_tokens,
                              std::size_t max_q, std::size_t max_total) {
  if (max_total < max_q + 3) {
    throw InvalidArgument("task length " + std::to_string(max_total) +
                          " cannot hold max question length " + std::to_string(max_q) +
                          " plus CLS and two SEP");
  }
  const std::size_t max_para = max_total - max_q - 3;
  return {std::min(question_tokens, max_q), std::min(paragraph_tokens, max_para)};
}

inline EncodedSequence build_task_input(const std::vector<int>& question,
                                        const std::vector<int>& paragraph, SegScheme seg,
                                        std::size_t max_q, std::size_t max_total) {
  const TaskLayout layout = task_layout(question.size(), paragraph.size(), max_q, max_total);
  const bool type1 = seg == SegScheme::Type1;
  const int seg_a = type1 ? 0 : 1;
  const int seg_b = 1;

  EncodedSequence s = detail::padded(max_total, type1 ? 0 : 1);
  detail::push(s, kClsId, seg_a);
  for (std::size_t i = 0; i < layout.question_len; ++i) detail::push(s, question[i], seg_a);
  detail::push(s, kSepId, seg_a);
  for (std::size_t i = 0; i < layout.paragraph_len; ++i) detail::push(s, paragraph[i], seg_b);
  detail::push(s, kSepId, seg_b);
  return s;
}

inline EncodedSequence build_task_input(std::string_view question, std::string_view paragraph,
                                        const Vocabulary& vocab, SegScheme seg,
                                        std::size_t max_q, std::size_t max_total) {
  return build_task_input(vocab.encode(question), vocab.encode(paragraph), seg, max_q,
                          max_total);
}

// Units that would overflow max_total are dropped whole, together with every
// unit after them.
inline EncodedSequence build_kb_input(const AssembledKnowledge& knowledge,
                                      const Vocabulary& vocab, SegScheme seg,
                                      std::size_t max_total) {
  if (max_total < 1) throw InvalidArgument("knowledge length must be at least 1");
  const bool type1 = seg == SegScheme::Type1;
  EncodedSequence s = detail::padded(max_total, type1 ? 1 : 0);
  detail::push(s, kClsId, 0);
  for (const auto& unit : knowledge.units) {
    const std::vector<int> ids = vocab.encode(unit);
    if (s.true_length + ids.size() + 1 > max_total) break;
    for (int id : ids) detail::push(s, id, 0);
    detail::push(s, kSepId, 0);
  }
  return s;
}

inline EncodedSequence build_triple_input(const KnowledgeUnit& unit, const Vocabulary& vocab,
                                          std::size_t max_len) {
  if (max_len < 3) throw InvalidArgument("triple length must be at least 3");
  std::vector<int> ids = vocab.encode(unit.text);
  if (ids.size() > max_len - 2) ids.resize(max_len - 2);
  EncodedSequence s = detail::padded(max_len, 0);
  detail::push(s, kClsId, 0);
  for (int id : ids) detail::push(s, id, 0);
  detail::push(s, kSepId, 0);
  return s;
}

// Space-joined tokens of the first true_length positions, specials included.
inline std::string decode(const EncodedSequence& s, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < s.true_length; ++i) {
    if (i) out += ' ';
    out += vocab.token(s.token_ids[i]);
  }
  return out;
}

}  // namespace roofer
