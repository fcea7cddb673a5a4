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

// Two encoders under a shared fusion "roof".
//
//   task input  [M] --task encoder--> [M x d] --+
//                                               +--concat--> [(M+N) x d] --fusion--> head
//   knowledge   [N] --kb encoder----> [N x d] --+
//
// The knowledge block is either one encoder pass over the assembled
// knowledge sequence (online) or the concatenation of per-unit passes
// through a frozen encoder (cached). The QA head emits a start and an end
// logit per position; the classification head mean-pools the unmasked fused
// rows.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "roofer/autodiff.hpp"
#include "roofer/encoder.hpp"
#include "roofer/error.hpp"
#include "roofer/kb_store.hpp"
#include "roofer/tokenizer.hpp"
#include "roofer/verbalizer.hpp"

namespace roofer {

enum class FusionKind { Linear, Recurrent, TransformerEncoder };
enum class HeadKind { QA, Classification };
enum class Group { Task, Kb, Fusion, Head };

inline const char* group_name(Group g) {
  switch (g) {
    case Group::Task: return "task";
    case Group::Kb: return "kb";
    case Group::Fusion: return "fusion";
    case Group::Head: return "head";
  }
  return "?";
}

struct ModelConfig {
  EncoderConfig task;
  EncoderConfig kb;
  std::size_t M = 64;      // task sequence length
  std::size_t max_q = 8;   // question budget inside M
  std::size_t N = 32;      // knowledge sequence length
  FusionKind fusion = FusionKind::TransformerEncoder;
  std::size_t k = 2;       // fusion depth
  bool cached_kb = false;
  std::size_t triple_len = 16;  // per-unit sequence length in cached mode
  bool cached_keep_cls = true;
  HeadKind head = HeadKind::QA;
  std::size_t classes = 2;
  SegScheme seg = SegScheme::Type2;
  ExpansionType expansion = ExpansionType::Exp2;
  SelectionMode selection = SelectionMode::HasTail;

  std::size_t d() const { return task.d; }

  void validate() const {
    task.validate();
    kb.validate();
    if (task.d != kb.d) throw InvalidConfig("task and knowledge encoders must share the hidden size");
    if (M < max_q + 3) throw InvalidConfig("M must hold the question budget plus CLS and two SEP");
    if (N < 1) throw InvalidConfig("N must be at least 1");
    if (task.max_positions < M) throw InvalidConfig("task encoder positions must cover M");
    if (!cached_kb && kb.max_positions < N) throw InvalidConfig("knowledge encoder positions must cover N");
    if (cached_kb && (triple_len < 3 || kb.max_positions < triple_len)) {
      throw InvalidConfig("cached triple length must be in [3, knowledge encoder positions]");
    }
    if (k < 1) throw InvalidConfig("fusion depth k must be at least 1");
    if (head == HeadKind::Classification && classes < 2) {
      throw InvalidConfig("classification needs at least 2 classes");
    }
  }

  // Stable text form; its hash keys checkpoints to a configuration.
  std::string canonical() const {
    std::ostringstream os;
    auto enc = [&os](const char* name, const EncoderConfig& e) {
      os << name << ".d=" << e.d << ';' << name << ".heads=" << e.n_heads << ';' << name
         << ".d_ff=" << e.d_ff << ';' << name << ".layers=" << e.n_layers << ';' << name
         << ".positions=" << e.max_positions << ';' << name << ".vocab=" << e.vocab_size << ';';
    };
    enc("task", task);
    enc("kb", kb);
    os << "M=" << M << ";max_q=" << max_q << ";N=" << N << ";fusion=" << static_cast<int>(fusion)
       << ";k=" << k << ";cached=" << cached_kb << ";triple_len=" << triple_len
       << ";keep_cls=" << cached_keep_cls << ";head=" << static_cast<int>(head)
       << ";classes=" << classes << ";seg=" << static_cast<int>(seg)
       << ";expansion=" << static_cast<int>(expansion)
       << ";selection=" << static_cast<int>(selection) << ';';
    return os.str();
  }

  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : canonical()) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }
};

struct LstmLayer {
  Tensor w_x;  // [d x 4d], gate order i f g o
  Tensor w_h;  // [d x 4d]
  Tensor b;    // [4d]
  Tensor h0;   // [d]
  Tensor c0;   // [d]
};

struct FusionWeights {
  FusionKind kind = FusionKind::TransformerEncoder;
  // Linear
  Tensor linear_w, linear_b;
  // Recurrent
  std::vector<LstmLayer> lstm;
  Tensor proj_w, proj_b;
  // TransformerEncoder
  std::vector<BlockWeights> blocks;

  template <class Fn>
  void visit(const std::string& prefix, Fn&& fn) const {
    switch (kind) {
      case FusionKind::Linear:
        fn(prefix + "linear.w", linear_w);
        fn(prefix + "linear.b", linear_b);
        break;
      case FusionKind::Recurrent:
        for (std::size_t i = 0; i < lstm.size(); ++i) {
          const std::string p = prefix + "lstm." + std::to_string(i) + ".";
          fn(p + "w_x", lstm[i].w_x);
          fn(p + "w_h", lstm[i].w_h);
          fn(p + "b", lstm[i].b);
          fn(p + "h0", lstm[i].h0);
          fn(p + "c0", lstm[i].c0);
        }
        fn(prefix + "proj.w", proj_w);
        fn(prefix + "proj.b", proj_b);
        break;
      case FusionKind::TransformerEncoder:
        for (std::size_t i = 0; i < blocks.size(); ++i) {
          blocks[i].visit(prefix + "layer." + std::to_string(i) + ".", fn);
        }
        break;
    }
  }
};

struct HeadWeights {
  Tensor w;  // [d x 2] for QA, [d x classes] for classification
  Tensor b;
};

struct Param {
  std::string name;
  Group group;
  Tensor tensor;
};

struct RoofWeights {
  EncoderWeights task;
  EncoderWeights kb;
  FusionWeights fusion;
  HeadWeights head;
  bool kb_frozen = false;

  // Every tensor in a fixed order, labeled with its group.
  std::vector<Param> parameters() const {
    std::vector<Param> out;
    auto add = [&out](Group g) {
      return [&out, g](const std::string& name, const Tensor& t) { out.push_back({name, g, t}); };
    };
    task.visit("task.", add(Group::Task));
    kb.visit("kb.", add(Group::Kb));
    fusion.visit("fusion.", add(Group::Fusion));
    out.push_back({"head.w", Group::Head, head.w});
    out.push_back({"head.b", Group::Head, head.b});
    return out;
  }

  std::vector<Param> trainable() const {
    std::vector<Param> out;
    for (auto& p : parameters()) {
      if (p.tensor.requires_grad()) out.push_back(std::move(p));
    }
    return out;
  }

  void zero_grad() const {
    for (auto& p : parameters()) p.tensor.zero_grad();
  }

  // Values deep-copied; no tensor is shared with this instance.
  RoofWeights clone() const {
    RoofWeights out;
    out.task = clone_encoder(task);
    out.kb = clone_encoder(kb);
    out.fusion = clone_fusion(fusion);
    out.head = {head.w.clone(), head.b.clone()};
    out.kb_frozen = kb_frozen;
    return out;
  }

 private:
  static EncoderWeights clone_encoder(const EncoderWeights& e) {
    EncoderWeights c;
    c.token_emb = e.token_emb.clone();
    c.position_emb = e.position_emb.clone();
    c.segment_emb = e.segment_emb.clone();
    c.emb_ln_g = e.emb_ln_g.clone();
    c.emb_ln_b = e.emb_ln_b.clone();
    for (const auto& l : e.layers) c.layers.push_back(l.clone());
    return c;
  }
  static FusionWeights clone_fusion(const FusionWeights& f) {
    FusionWeights c;
    c.kind = f.kind;
    if (f.linear_w.defined()) c.linear_w = f.linear_w.clone();
    if (f.linear_b.defined()) c.linear_b = f.linear_b.clone();
    for (const auto& l : f.lstm) {
      c.lstm.push_back({l.w_x.clone(), l.w_h.clone(), l.b.clone(), l.h0.clone(), l.c0.clone()});
    }
    if (f.proj_w.defined()) c.proj_w = f.proj_w.clone();
    if (f.proj_b.defined()) c.proj_b = f.proj_b.clone();
    for (const auto& b : f.blocks) c.blocks.push_back(b.clone());
    return c;
  }
};

// ---------------------------------------------------------------------------
// Initialization

// Fusion block i becomes an independent copy of donor layer
// (n_layers - k + i), i.e. the donor's last k layers in order.
inline std::vector<BlockWeights> init_fusion_from_encoder(const EncoderWeights& donor, std::size_t k,
                                                          std::size_t d) {
  if (k > donor.layers.size()) {
    throw DepthTooLarge("fusion depth " + std::to_string(k) + " exceeds donor depth " +
                        std::to_string(donor.layers.size()));
  }
  if (k == 0) throw InvalidArgument("fusion depth must be at least 1");
  std::vector<BlockWeights> blocks;
  const std::size_t first = donor.layers.size() - k;
  for (std::size_t i = 0; i < k; ++i) {
    const BlockWeights& src = donor.layers[first + i];
    if (src.d() != d) {
      throw DimMismatch("donor width " + std::to_string(src.d()) + " differs from " + std::to_string(d));
    }
    BlockWeights copy = src.clone();
    copy.visit("", [](const std::string&, Tensor t) { t.set_requires_grad(true); });
    blocks.push_back(std::move(copy));
  }
  return blocks;
}

inline FusionWeights init_fusion(const ModelConfig& cfg, std::mt19937_64& rng, double stddev = 0.02) {
  using detail::normal_param;
  using detail::zeros_param;
  const std::size_t d = cfg.d();
  FusionWeights f;
  f.kind = cfg.fusion;
  switch (cfg.fusion) {
    case FusionKind::Linear:
      f.linear_w = normal_param({d, d}, stddev, rng);
      f.linear_b = zeros_param({d});
      break;
    case FusionKind::Recurrent: {
      for (std::size_t i = 0; i < cfg.k; ++i) {
        LstmLayer l{normal_param({d, 4 * d}, stddev, rng), normal_param({d, 4 * d}, stddev, rng),
                    zeros_param({4 * d}), zeros_param({d}), zeros_param({d})};
        // Forget-gate bias starts at 1.
        for (std::size_t j = d; j < 2 * d; ++j) l.b.mutable_values()[j] = 1.0;
        f.lstm.push_back(std::move(l));
      }
      f.proj_w = normal_param({d, d}, stddev, rng);
      f.proj_b = zeros_param({d});
      break;
    }
    case FusionKind::TransformerEncoder:
      for (std::size_t i = 0; i < cfg.k; ++i) f.blocks.push_back(BlockWeights::init(d, cfg.task.d_ff, stddev, rng));
      break;
  }
  return f;
}

// With fusion_from_task, transformer fusion blocks start as copies of the
// task encoder's last k layers.
inline RoofWeights init_roof(const ModelConfig& cfg, std::uint64_t seed, double stddev = 0.02,
                             bool fusion_from_task = false) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  RoofWeights w;
  w.task = EncoderWeights::init(cfg.task, rng, stddev);
  w.kb = EncoderWeights::init(cfg.kb, rng, stddev);
  w.fusion = init_fusion(cfg, rng, stddev);
  if (fusion_from_task && cfg.fusion == FusionKind::TransformerEncoder) {
    w.fusion.blocks = init_fusion_from_encoder(w.task, cfg.k, cfg.d());
  }
  const std::size_t out = cfg.head == HeadKind::QA ? 2 : cfg.classes;
  w.head.w = detail::normal_param({cfg.d(), out}, stddev, rng);
  w.head.b = detail::zeros_param({out});
  if (cfg.cached_kb) {
    w.kb.set_requires_grad(false);
    w.kb_frozen = true;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Knowledge encoding

struct KbEncoding {
  Tensor emb;               // [N x d]
  std::vector<bool> mask;   // true on real knowledge rows
};

inline KbEncoding kb_encode_online(const EncodedSequence& kb_input, const RoofWeights& w,
                                   const ModelConfig& cfg, const ad::Mode& mode) {
  if (kb_input.length() != cfg.N) {
    throw ShapeMismatch("knowledge input length " + std::to_string(kb_input.length()) +
                        " differs from N = " + std::to_string(cfg.N));
  }
  return {encode(kb_input, w.kb, cfg.kb, mode), kb_input.attention_mask};
}

// Encodes every unit on its own through the frozen encoder (eval mode), then
// stacks the non-padding rows of each in order, truncated to N and padded
// with masked zero rows. The result is detached from every weight.
inline KbEncoding kb_encode_cached(const std::vector<EncodedSequence>& triple_inputs,
                                   const EncoderWeights& frozen, const ModelConfig& cfg) {
  const std::size_t d = cfg.d();
  std::vector<double> rows;
  rows.reserve(cfg.N * d);
  std::size_t used = 0;
  for (const auto& input : triple_inputs) {
    if (used == cfg.N) break;
    const Tensor out = encode(input, frozen, cfg.kb, ad::Mode::eval());
    const std::size_t first = cfg.cached_keep_cls ? 0 : 1;
    for (std::size_t r = first; r < input.true_length && used < cfg.N; ++r, ++used) {
      rows.insert(rows.end(), out.values().begin() + static_cast<std::ptrdiff_t>(r * d),
                  out.values().begin() + static_cast<std::ptrdiff_t>((r + 1) * d));
    }
  }
  std::vector<bool> mask(cfg.N, false);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(used), true);
  rows.resize(cfg.N * d, 0.0);
  return {Tensor({cfg.N, d}, std::move(rows)), std::move(mask)};
}

inline KbEncoding kb_encode_cached(const std::vector<KnowledgeUnit>& units, const Vocabulary& vocab,
                                   const EncoderWeights& frozen, const ModelConfig& cfg) {
  std::vector<EncodedSequence> inputs;
  inputs.reserve(units.size());
  for (const auto& u : units) inputs.push_back(build_triple_input(u, vocab, cfg.triple_len));
  return kb_encode_cached(inputs, frozen, cfg);
}

// ---------------------------------------------------------------------------
// Fusion

namespace detail {

// Unidirectional LSTM over rows of x. Masked positions leave the state
// untouched and emit the carried hidden state.
inline Tensor lstm_layer(const Tensor& x, const std::vector<bool>& mask, const LstmLayer& l) {
  using namespace ad;
  const std::size_t len = x.rows(), d = x.cols();
  const Tensor gates_x = affine(x, l.w_x, l.b);
  Tensor h = reshape(l.h0, {1, d});
  Tensor c = reshape(l.c0, {1, d});
  std::vector<Tensor> outputs;
  outputs.reserve(len);
  for (std::size_t t = 0; t < len; ++t) {
    if (mask[t]) {
      const Tensor g = add(slice_rows(gates_x, t, 1), matmul(h, l.w_h));
      const Tensor in = sigmoid(slice_cols(g, 0, d));
      const Tensor forget = sigmoid(slice_cols(g, d, d));
      const Tensor cand = ad::tanh(slice_cols(g, 2 * d, d));
      const Tensor out = sigmoid(slice_cols(g, 3 * d, d));
      c = add(mul(forget, c), mul(in, cand));
      h = mul(out, ad::tanh(c));
    }
    outputs.push_back(h);
  }
  return concat_rows(outputs);
}

}  // namespace detail

// Concatenates task rows then knowledge rows and applies the fusion stack.
inline Tensor fuse(const Tensor& task_emb, const Tensor& kb_emb, const std::vector<bool>& task_mask,
                   const std::vector<bool>& kb_mask, const FusionWeights& w, const ModelConfig& cfg,
                   const ad::Mode& mode) {
  using namespace ad;
  const std::size_t d = cfg.d();
  if (task_emb.rank() != 2 || task_emb.rows() != cfg.M || task_emb.cols() != d ||
      kb_emb.rank() != 2 || kb_emb.rows() != cfg.N || kb_emb.cols() != d ||
      task_mask.size() != cfg.M || kb_mask.size() != cfg.N) {
    throw ShapeMismatch("fuse expects [" + std::to_string(cfg.M) + "x" + std::to_string(d) + "] and [" +
                        std::to_string(cfg.N) + "x" + std::to_string(d) + "], got " +
                        to_string(task_emb.shape()) + " and " + to_string(kb_emb.shape()));
  }
  const Tensor joined = concat_rows({task_emb, kb_emb});
  std::vector<bool> mask(task_mask);
  mask.insert(mask.end(), kb_mask.begin(), kb_mask.end());

  switch (w.kind) {
    case FusionKind::Linear:
      return affine(joined, w.linear_w, w.linear_b);
    case FusionKind::Recurrent: {
      Tensor h = joined;
      for (const auto& layer : w.lstm) h = detail::lstm_layer(h, mask, layer);
      return affine(h, w.proj_w, w.proj_b);
    }
    case FusionKind::TransformerEncoder: {
      if (w.blocks.empty()) throw InvalidConfig("transformer fusion needs at least one block");
      Tensor h = joined;
      for (const auto& block : w.blocks) h = encoder_block(h, mask, block, cfg.task.n_heads, cfg.task.dropout, mode);
      return h;
    }
  }
  throw InvalidConfig("unknown fusion kind");
}

// ---------------------------------------------------------------------------
// Heads and decoding

inline Tensor qa_head(const Tensor& fused, const HeadWeights& w) {
  if (w.w.cols() != 2) throw ShapeMismatch("QA head must have 2 outputs");
  return ad::affine(fused, w.w, w.b);
}

inline Tensor cls_head(const Tensor& fused, const std::vector<bool>& mask, const HeadWeights& w) {
  using namespace ad;
  const Tensor pooled = reshape(mean_rows(fused, mask), {1, fused.cols()});
  const Tensor logits = affine(pooled, w.w, w.b);
  return reshape(logits, {w.w.cols()});
}

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

// argmax over lo <= i <= j <= hi of start[i] + end[j], smallest i then
// smallest j on ties, in one pass.
inline Span predict_span(const Tensor& logits, std::size_t lo, std::size_t hi) {
  if (logits.rank() != 2 || logits.cols() != 2) throw ShapeMismatch("span logits must be [L x 2]");
  if (lo > hi || hi >= logits.rows()) {
    throw EmptyWindow("window [" + std::to_string(lo) + ", " + std::to_string(hi) + "] is empty or out of range");
  }
  std::size_t best_start = lo;
  Span best{lo, lo};
  double best_score = logits.at(lo, 0) + logits.at(lo, 1);
  for (std::size_t j = lo; j <= hi; ++j) {
    if (logits.at(j, 0) > logits.at(best_start, 0)) best_start = j;
    const double score = logits.at(best_start, 0) + logits.at(j, 1);
    if (score > best_score || (score == best_score && best_start < best.start)) {
      best_score = score;
      best = {best_start, j};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Whole model

struct RoofInput {
  EncodedSequence task;
  EncodedSequence kb;                     // online mode
  std::vector<EncodedSequence> triples;   // cached mode
};

struct RoofOutput {
  Tensor logits;  // [(M+N) x 2] or [classes]
  Tensor fused;   // [(M+N) x d]
  std::vector<bool> mask;
};

// `cached` supplies a precomputed knowledge block; otherwise it is computed
// from the input according to cfg.cached_kb.
inline RoofOutput forward(const RoofInput& input, const RoofWeights& w, const ModelConfig& cfg,
                          const ad::Mode& mode, const KbEncoding* cached = nullptr) {
  if (input.task.length() != cfg.M) {
    throw ShapeMismatch("task input length " + std::to_string(input.task.length()) +
                        " differs from M = " + std::to_string(cfg.M));
  }
  const Tensor task_emb = encode(input.task, w.task, cfg.task, mode);
  KbEncoding kb;
  if (cached != nullptr) {
    kb = *cached;
  } else if (cfg.cached_kb) {
    kb = kb_encode_cached(input.triples, w.kb, cfg);
  } else {
    kb = kb_encode_online(input.kb, w, cfg, mode);
  }
  RoofOutput out;
  out.fused = fuse(task_emb, kb.emb, input.task.attention_mask, kb.mask, w.fusion, cfg, mode);
  out.mask = input.task.attention_mask;
  out.mask.insert(out.mask.end(), kb.mask.begin(), kb.mask.end());
  out.logits = cfg.head == HeadKind::QA ? qa_head(out.fused, w.head) : cls_head(out.fused, out.mask, w.head);
  return out;
}

// QA: mean of start and end cross-entropies over all M+N positions.
inline Tensor qa_loss(const Tensor& logits, std::size_t start, std::size_t end) {
  return ad::cross_entropy_from_logits(ad::transpose(logits),
                                       {static_cast<int>(start), static_cast<int>(end)});
}

inline Tensor cls_loss(const Tensor& logits, std::size_t label) {
  return ad::cross_entropy_from_logits(ad::reshape(logits, {1, logits.size()}), {static_cast<int>(label)});
}

}  // namespace roofer
