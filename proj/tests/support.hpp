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

// Test-side oracles and fixtures. The oracles are deliberately naive and share
// no code with the library beyond its data types.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "roofer/roofer.hpp"
#include "roofer/toy_data.hpp"

namespace roofer::testing {

// ---------------------------------------------------------------------------
// Selection oracle: character-by-character scan for the first case-folded
// occurrence of every triple's head.

inline char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

inline long first_match(const std::string& hay, const std::string& needle) {
  if (needle.size() > hay.size()) return -1;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < needle.size() && ok; ++j) ok = lower(hay[i + j]) == lower(needle[j]);
    if (ok) return static_cast<long>(i);
  }
  return -1;
}

inline std::vector<Triple> oracle_select(const std::vector<Triple>& kb, const std::string& paragraph,
                                         SelectionMode mode, std::size_t max_triples) {
  std::vector<std::pair<long, std::size_t>> hits;
  for (std::size_t i = 0; i < kb.size(); ++i) {
    const long pos = first_match(paragraph, kb[i].head);
    if (pos < 0) continue;
    if (mode == SelectionMode::HasTail && first_match(paragraph, kb[i].tail) < 0) continue;
    hits.emplace_back(pos, i);
  }
  std::stable_sort(hits.begin(), hits.end(), [](auto& a, auto& b) { return a.first < b.first; });
  std::vector<Triple> out;
  for (std::size_t i = 0; i < hits.size() && i < max_triples; ++i) out.push_back(kb[hits[i].second]);
  return out;
}

struct SelectionCase {
  std::vector<Triple> kb;
  std::string paragraph;
};

// Small alphabet so that substring hits, case variants and duplicates occur.
inline SelectionCase random_selection_case(std::mt19937_64& rng) {
  static const std::vector<std::string> words{"ab", "Ab", "abc", "b", "ca", "cab", "BC", "a b", "x", "xy", "yx", "zz"};
  std::uniform_int_distribution<std::size_t> n_triples(1, 50), word(0, words.size() - 1), len(0, 200);
  SelectionCase c;
  const std::size_t n = n_triples(rng);
  for (std::size_t i = 0; i < n; ++i) {
    c.kb.push_back({words[word(rng)], "r" + std::to_string(word(rng)), words[word(rng)], i + 1});
  }
  const std::size_t target = len(rng);
  std::uniform_int_distribution<int> ch(0, 6);
  const char alphabet[] = {'a', 'b', 'c', 'x', 'y', 'z', ' '};
  while (c.paragraph.size() < target) {
    char x = alphabet[ch(rng)];
    if (ch(rng) == 0) x = static_cast<char>(std::toupper(static_cast<unsigned char>(x)));
    c.paragraph += x;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Span oracle: exhaustive search over every (i, j) with lo <= i <= j <= hi,
// earliest start then earliest end on ties.

inline Span oracle_span(const ad::Tensor& logits, std::size_t lo, std::size_t hi) {
  Span best{lo, lo};
  double best_score = -INFINITY;
  for (std::size_t i = lo; i <= hi; ++i)
    for (std::size_t j = i; j <= hi; ++j) {
      const double s = logits.at(i, 0) + logits.at(j, 1);
      if (s > best_score) {
        best_score = s;
        best = {i, j};
      }
    }
  return best;
}

// ---------------------------------------------------------------------------
// Metric oracles written straight from the formulas.

inline double naive_accuracy(const std::vector<double>& p, const std::vector<double>& g) {
  double hit = 0;
  for (std::size_t i = 0; i < p.size(); ++i) hit += p[i] == g[i] ? 1 : 0;
  return hit / static_cast<double>(p.size());
}

inline void naive_counts(const std::vector<double>& p, const std::vector<double>& g, double& tp, double& tn,
                         double& fp, double& fn) {
  tp = tn = fp = fn = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 1 && g[i] == 1) tp += 1;
    if (p[i] == 0 && g[i] == 0) tn += 1;
    if (p[i] == 1 && g[i] == 0) fp += 1;
    if (p[i] == 0 && g[i] == 1) fn += 1;
  }
}

inline double naive_f1(const std::vector<double>& p, const std::vector<double>& g) {
  double tp, tn, fp, fn;
  naive_counts(p, g, tp, tn, fp, fn);
  const double precision = tp + fp > 0 ? tp / (tp + fp) : 0;
  const double recall = tp + fn > 0 ? tp / (tp + fn) : 0;
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0;
}

inline double naive_mcc(const std::vector<double>& p, const std::vector<double>& g) {
  double tp, tn, fp, fn;
  naive_counts(p, g, tp, tn, fp, fn);
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  return den == 0 ? 0 : (tp * tn - fp * fn) / std::sqrt(den);
}

inline double naive_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxx == 0 || syy == 0 ? 0 : sxy / std::sqrt(sxx * syy);
}

// Rank of x[i] = 1 + (#smaller) + (#equal - 1) / 2.
inline std::vector<double> naive_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double smaller = 0, equal = 0;
    for (double v : x) {
      smaller += v < x[i] ? 1 : 0;
      equal += v == x[i] ? 1 : 0;
    }
    r[i] = 1 + smaller + (equal - 1) / 2;
  }
  return r;
}

inline double naive_pearson_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return (naive_pearson(x, y) + naive_pearson(naive_ranks(x), naive_ranks(y))) / 2;
}

inline double naive_exact_match(const std::vector<metrics::SpanPair>& p, const std::vector<metrics::SpanPair>& g) {
  double hit = 0;
  for (std::size_t i = 0; i < p.size(); ++i) hit += p[i] == g[i] ? 1 : 0;
  return hit / static_cast<double>(p.size());
}

// ---------------------------------------------------------------------------
// Model fixtures

inline ModelConfig tiny_config(std::size_t vocab = 24) {
  ModelConfig c;
  for (EncoderConfig* e : {&c.task, &c.kb}) {
    e->d = 8;
    e->n_heads = 2;
    e->d_ff = 16;
    e->n_layers = 2;
    e->vocab_size = vocab;
    e->dropout = 0.0;
  }
  c.M = 10;
  c.max_q = 3;
  c.N = 8;
  c.task.max_positions = c.M;
  c.kb.max_positions = c.N;
  c.k = 1;
  c.triple_len = 8;
  return c;
}

inline EncodedSequence random_sequence(std::mt19937_64& rng, std::size_t len, std::size_t true_len,
                                       std::size_t vocab, bool two_segments) {
  EncodedSequence s;
  std::uniform_int_distribution<int> id(static_cast<int>(kReservedTokens), static_cast<int>(vocab) - 1);
  std::uniform_int_distribution<int> seg(0, 1);
  for (std::size_t i = 0; i < len; ++i) {
    const bool real = i < true_len;
    s.token_ids.push_back(real ? (i == 0 ? kClsId : id(rng)) : kPadId);
    s.segment_ids.push_back(two_segments ? seg(rng) : 0);
    s.attention_mask.push_back(real);
  }
  s.true_length = true_len;
  return s;
}

// Random input for `cfg`: task and online knowledge sequences with at least
// one real position each, plus 1-3 triple sequences for cached mode.
inline RoofInput random_input(std::mt19937_64& rng, const ModelConfig& cfg) {
  RoofInput in;
  std::uniform_int_distribution<std::size_t> tl(1, cfg.M), kl(1, cfg.N), tr(2, cfg.triple_len), nt(1, 3);
  in.task = random_sequence(rng, cfg.M, tl(rng), cfg.task.vocab_size, true);
  in.kb = random_sequence(rng, cfg.N, kl(rng), cfg.kb.vocab_size, true);
  for (std::size_t i = nt(rng); i > 0; --i) {
    in.triples.push_back(random_sequence(rng, cfg.triple_len, tr(rng), cfg.kb.vocab_size, false));
  }
  return in;
}

// ---------------------------------------------------------------------------
// Toy reference runs

struct ToyRun {
  ModelConfig model;
  double init_std = 0.1;
  TrainConfig train;
  Vocabulary vocab;
  std::vector<Example> data;
};

inline ModelConfig toy_model_config(std::size_t vocab_size, HeadKind head) {
  ModelConfig c;
  for (EncoderConfig* e : {&c.task, &c.kb}) {
    e->d = 32;
    e->n_heads = 2;
    e->d_ff = 64;
    e->n_layers = 2;
    e->vocab_size = vocab_size;
    e->dropout = 0.1;
  }
  c.M = 64;
  c.max_q = 8;
  c.N = 32;
  c.task.max_positions = c.M;
  c.kb.max_positions = c.N;
  c.fusion = FusionKind::TransformerEncoder;
  c.k = 2;
  c.head = head;
  c.classes = 2;
  return c;
}

inline TrainConfig toy_train_config(SchedulerKind scheduler, std::size_t steps, std::size_t n_examples) {
  TrainConfig t;
  t.base_lr = 3e-4;
  t.fusion_lr_multiplier = 10.0;
  t.optimizer = OptimizerKind::AdamW;
  t.scheduler = scheduler;
  t.batch_size = 8;
  t.epochs = (steps * t.batch_size + n_examples - 1) / n_examples;
  t.max_steps = steps;
  t.seed = 1234;
  return t;
}

inline ToyRun toy_qa_run(bool cached, std::size_t steps = 500) {
  const auto corpus = toy::make_qa(32, 7);
  const KnowledgeBase kb(corpus.triples);
  const KnowledgeFormat format;
  std::vector<std::string> texts;
  for (const auto& r : corpus.records) {
    texts.push_back(r.question);
    texts.push_back(r.paragraph);
    for (const auto& u : format.units_for(kb, r.paragraph)) texts.push_back(u.text);
  }
  ToyRun run;
  run.vocab = build_vocab(texts, 256);
  run.model = toy_model_config(run.vocab.size(), HeadKind::QA);
  run.model.cached_kb = cached;
  if (cached) run.model.kb.max_positions = run.model.triple_len;
  run.train = toy_train_config(SchedulerKind::LinearDecay, steps, corpus.records.size());
  run.data = prepare_qa(corpus.records, run.vocab, &kb, format, run.model).examples;
  return run;
}

inline ToyRun toy_cls_run(std::size_t steps = 500) {
  const auto records = toy::make_cls(64, 11);
  std::vector<std::string> texts;
  for (const auto& r : records) texts.push_back(r.sentence1);
  ToyRun run;
  run.vocab = build_vocab(texts, 256);
  run.model = toy_model_config(run.vocab.size(), HeadKind::Classification);
  run.train = toy_train_config(SchedulerKind::CosineDecay, steps, records.size());
  run.data = prepare_cls(records, run.vocab, nullptr, KnowledgeFormat{}, run.model).examples;
  return run;
}

}  // namespace roofer::testing
