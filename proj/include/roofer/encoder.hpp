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

// BERT-style encoder: token + position + segment embeddings followed by
// post-layer-norm self-attention blocks. Padding keys are masked with an
// additive -1e9 before the softmax.

#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "roofer/autodiff.hpp"
#include "roofer/error.hpp"
#include "roofer/tokenizer.hpp"

namespace roofer {

using ad::Tensor;

inline constexpr double kLayerNormEps = 1e-12;

struct EncoderConfig {
  std::size_t d = 32;
  std::size_t n_heads = 2;
  std::size_t d_ff = 64;
  std::size_t n_layers = 2;
  std::size_t max_positions = 64;
  std::size_t vocab_size = 256;
  std::size_t n_segments = 2;
  double dropout = 0.1;

  void validate() const {
    if (d == 0 || n_heads == 0 || d % n_heads != 0) {
      throw InvalidConfig("hidden size " + std::to_string(d) + " must be a positive multiple of " +
                          std::to_string(n_heads) + " heads");
    }
    if (d_ff == 0 || max_positions == 0 || vocab_size < kReservedTokens || n_segments != 2) {
      throw InvalidConfig("encoder dimensions out of range");
    }
    if (dropout < 0.0 || dropout >= 1.0) throw InvalidConfig("dropout must be in [0, 1)");
  }
};

namespace detail {

// Box-Muller over the portable uniform draw.
inline double gaussian(std::mt19937_64& rng) {
  const double u1 = 1.0 - ad::uniform01(rng);
  const double u2 = ad::uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline Tensor normal_param(ad::Shape shape, double stddev, std::mt19937_64& rng) {
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = stddev * gaussian(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

inline Tensor zeros_param(ad::Shape shape) { return Tensor::zeros(std::move(shape), true); }
inline Tensor ones_param(ad::Shape shape) { return Tensor::full(std::move(shape), 1.0, true); }

}  // namespace detail

// One self-attention block. Also used verbatim as a transformer fusion layer.
struct BlockWeights {
  Tensor q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b;
  Tensor ln1_g, ln1_b;
  Tensor ff1_w, ff1_b, ff2_w, ff2_b;
  Tensor ln2_g, ln2_b;

  static BlockWeights init(std::size_t d, std::size_t d_ff, double stddev, std::mt19937_64& rng) {
    using detail::normal_param;
    using detail::zeros_param;
    BlockWeights b;
    b.q_w = normal_param({d, d}, stddev, rng);
    b.q_b = zeros_param({d});
    b.k_w = normal_param({d, d}, stddev, rng);
    b.k_b = zeros_param({d});
    b.v_w = normal_param({d, d}, stddev, rng);
    b.v_b = zeros_param({d});
    b.o_w = normal_param({d, d}, stddev, rng);
    b.o_b = zeros_param({d});
    b.ln1_g = detail::ones_param({d});
    b.ln1_b = zeros_param({d});
    b.ff1_w = normal_param({d, d_ff}, stddev, rng);
    b.ff1_b = zeros_param({d_ff});
    b.ff2_w = normal_param({d_ff, d}, stddev, rng);
    b.ff2_b = zeros_param({d});
    b.ln2_g = detail::ones_param({d});
    b.ln2_b = zeros_param({d});
    return b;
  }

  // Calls fn(name, tensor) for every tensor in a fixed order.
  template <class Fn>
  void visit(const std::string& prefix, Fn&& fn) const {
    fn(prefix + "attn.q.w", q_w);
    fn(prefix + "attn.q.b", q_b);
    fn(prefix + "attn.k.w", k_w);
    fn(prefix + "attn.k.b", k_b);
    fn(prefix + "attn.v.w", v_w);
    fn(prefix + "attn.v.b", v_b);
    fn(prefix + "attn.o.w", o_w);
    fn(prefix + "attn.o.b", o_b);
    fn(prefix + "ln1.g", ln1_g);
    fn(prefix + "ln1.b", ln1_b);
    fn(prefix + "ff1.w", ff1_w);
    fn(prefix + "ff1.b", ff1_b);
    fn(prefix + "ff2.w", ff2_w);
    fn(prefix + "ff2.b", ff2_b);
    fn(prefix + "ln2.g", ln2_g);
    fn(prefix + "ln2.b", ln2_b);
  }

  BlockWeights clone() const {
    BlockWeights out;
    Tensor* dst[] = {&out.q_w,   &out.q_b,   &out.k_w,   &out.k_b,   &out.v_w,   &out.v_b,
                     &out.o_w,   &out.o_b,   &out.ln1_g, &out.ln1_b, &out.ff1_w, &out.ff1_b,
                     &out.ff2_w, &out.ff2_b, &out.ln2_g, &out.ln2_b};
    std::size_t i = 0;
    visit("", [&](const std::string&, const Tensor& t) { *dst[i++] = t.clone(); });
    return out;
  }

  std::size_t d() const { return q_w.rows(); }
};

struct EncoderWeights {
  Tensor token_emb, position_emb, segment_emb;
  Tensor emb_ln_g, emb_ln_b;
  std::vector<BlockWeights> layers;

  static EncoderWeights init(const EncoderConfig& cfg, std::mt19937_64& rng, double stddev = 0.02) {
    cfg.validate();
    EncoderWeights w;
    w.token_emb = detail::normal_param({cfg.vocab_size, cfg.d}, stddev, rng);
    w.position_emb = detail::normal_param({cfg.max_positions, cfg.d}, stddev, rng);
    w.segment_emb = detail::normal_param({cfg.n_segments, cfg.d}, stddev, rng);
    w.emb_ln_g = detail::ones_param({cfg.d});
    w.emb_ln_b = detail::zeros_param({cfg.d});
    for (std::size_t i = 0; i < cfg.n_layers; ++i) {
      w.layers.push_back(BlockWeights::init(cfg.d, cfg.d_ff, stddev, rng));
    }
    return w;
  }

  // Names are dotted paths such as "layer.3.attn.q.w".
  template <class Fn>
  void visit(const std::string& prefix, Fn&& fn) const {
    fn(prefix + "emb.token", token_emb);
    fn(prefix + "emb.position", position_emb);
    fn(prefix + "emb.segment", segment_emb);
    fn(prefix + "emb.ln.g", emb_ln_g);
    fn(prefix + "emb.ln.b", emb_ln_b);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].visit(prefix + "layer." + std::to_string(i) + ".", fn);
    }
  }

  void set_requires_grad(bool on) const {
    visit("", [on](const std::string&, Tensor t) { t.set_requires_grad(on); });
  }
};

// Multi-head self-attention and feed-forward sublayers, each followed by a
// residual connection and layer norm.
inline Tensor encoder_block(const Tensor& x, const std::vector<bool>& key_mask,
                            const BlockWeights& w, std::size_t n_heads, double dropout,
                            const ad::Mode& mode) {
  using namespace ad;
  const std::size_t d = x.cols();
  if (w.d() != d || d % n_heads != 0) {
    throw ShapeMismatch("encoder block expects width " + std::to_string(w.d()) + ", got " +
                        std::to_string(d));
  }
  const std::size_t dh = d / n_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  const Tensor q = affine(x, w.q_w, w.q_b);
  const Tensor k = affine(x, w.k_w, w.k_b);
  const Tensor v = affine(x, w.v_w, w.v_b);

  std::vector<Tensor> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Tensor qh = n_heads == 1 ? q : slice_cols(q, h * dh, dh);
    const Tensor kh = n_heads == 1 ? k : slice_cols(k, h * dh, dh);
    const Tensor vh = n_heads == 1 ? v : slice_cols(v, h * dh, dh);
    Tensor scores = mask_keys(scale(matmul_nt(qh, kh), inv_sqrt_dh), key_mask);
    Tensor probs = ad::dropout(softmax_rows(scores), dropout, mode);
    heads.push_back(matmul(probs, vh));
  }
  const Tensor context = n_heads == 1 ? heads.front() : concat_cols(heads);
  const Tensor attn = ad::dropout(affine(context, w.o_w, w.o_b), dropout, mode);
  const Tensor h1 = layer_norm(add(x, attn), w.ln1_g, w.ln1_b, kLayerNormEps);

  const Tensor ff = affine(gelu(affine(h1, w.ff1_w, w.ff1_b)), w.ff2_w, w.ff2_b);
  return layer_norm(add(h1, ad::dropout(ff, dropout, mode)), w.ln2_g, w.ln2_b, kLayerNormEps);
}

// Sum of token, position and segment embeddings, normalized. Positions are
// 0..L-1.
inline Tensor embed(const EncodedSequence& input, const EncoderWeights& w,
                    const EncoderConfig& cfg, const ad::Mode& mode) {
  using namespace ad;
  const std::size_t len = input.length();
  if (len > cfg.max_positions) {
    throw TooLong("sequence of " + std::to_string(len) + " exceeds " +
                  std::to_string(cfg.max_positions) + " positions");
  }
  if (input.segment_ids.size() != len || input.attention_mask.size() != len) {
    throw ShapeMismatch("token, segment and mask lengths differ");
  }
  std::vector<int> positions(len);
  for (std::size_t i = 0; i < len; ++i) positions[i] = static_cast<int>(i);

  const Tensor sum = add(add(embedding(w.token_emb, input.token_ids), embedding(w.position_emb, positions)),
                         embedding(w.segment_emb, input.segment_ids));
  return ad::dropout(layer_norm(sum, w.emb_ln_g, w.emb_ln_b, kLayerNormEps), cfg.dropout, mode);
}

inline Tensor encoder_forward(const Tensor& x, const std::vector<bool>& mask,
                              const EncoderWeights& w, const EncoderConfig& cfg,
                              const ad::Mode& mode) {
  if (x.rank() != 2 || x.cols() != cfg.d || mask.size() != x.rows()) {
    throw ShapeMismatch("encoder input " + ad::to_string(x.shape()) + " with mask of " +
                        std::to_string(mask.size()) + " for width " + std::to_string(cfg.d));
  }
  Tensor h = x;
  for (const auto& layer : w.layers) h = encoder_block(h, mask, layer, cfg.n_heads, cfg.dropout, mode);
  return h;
}

inline Tensor encode(const EncodedSequence& input, const EncoderWeights& w,
                     const EncoderConfig& cfg, const ad::Mode& mode) {
  return encoder_forward(embed(input, w, cfg, mode), input.attention_mask, w, cfg, mode);
}

}  // namespace roofer
