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

#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

namespace roofer {
namespace {

using testing::tiny_config;

TEST(Forward, ShapeChainForEveryFusionAndHead) {
  std::mt19937_64 rng(1);
  for (auto fusion : {FusionKind::Linear, FusionKind::Recurrent, FusionKind::TransformerEncoder}) {
    for (auto head : {HeadKind::QA, HeadKind::Classification}) {
      for (bool cached : {false, true}) {
        ModelConfig cfg = tiny_config();
        cfg.fusion = fusion;
        cfg.head = head;
        cfg.classes = 3;
        cfg.cached_kb = cached;
        cfg.kb.max_positions = cached ? cfg.triple_len : cfg.N;
        const RoofWeights w = init_roof(cfg, 2);
        const RoofOutput out = forward(testing::random_input(rng, cfg), w, cfg, ad::Mode::eval());
        EXPECT_EQ(out.fused.shape(), (ad::Shape{cfg.M + cfg.N, cfg.d()}));
        const ad::Shape want = head == HeadKind::QA ? ad::Shape{cfg.M + cfg.N, 2} : ad::Shape{3};
        EXPECT_EQ(out.logits.shape(), want);
        EXPECT_EQ(out.mask.size(), cfg.M + cfg.N);
      }
    }
  }
}

TEST(Forward, WrongLengthsRejected) {
  const ModelConfig cfg = tiny_config();
  const RoofWeights w = init_roof(cfg, 1);
  std::mt19937_64 rng(2);
  RoofInput in = testing::random_input(rng, cfg);
  in.kb = testing::random_sequence(rng, cfg.N + 1, 2, cfg.kb.vocab_size, false);
  EXPECT_THROW(forward(in, w, cfg, ad::Mode::eval()), ShapeMismatch);
  in = testing::random_input(rng, cfg);
  in.task = testing::random_sequence(rng, cfg.M - 1, 2, cfg.task.vocab_size, false);
  EXPECT_THROW(forward(in, w, cfg, ad::Mode::eval()), ShapeMismatch);
}

TEST(Forward, PadInvarianceAllFusions) {
  std::mt19937_64 rng(3);
  for (auto fusion : {FusionKind::Linear, FusionKind::Recurrent, FusionKind::TransformerEncoder}) {
    ModelConfig cfg = tiny_config();
    cfg.fusion = fusion;
    cfg.head = HeadKind::Classification;
    const RoofWeights w = init_roof(cfg, 4, 0.3);
    for (int trial = 0; trial < 10; ++trial) {
      const RoofInput a = testing::random_input(rng, cfg);
      RoofInput b = a;
      for (std::size_t i = a.task.true_length; i < cfg.M; ++i) b.task.token_ids[i] = 5;
      for (std::size_t i = a.kb.true_length; i < cfg.N; ++i) b.kb.token_ids[i] = 7;
      const auto la = forward(a, w, cfg, ad::Mode::eval()).logits.values();
      const auto lb = forward(b, w, cfg, ad::Mode::eval()).logits.values();
      for (std::size_t c = 0; c < la.size(); ++c) EXPECT_NEAR(la[c], lb[c], 1e-12);
    }
  }
}

TEST(Forward, KnowledgeChangesOutput) {
  const ModelConfig cfg = tiny_config();
  const RoofWeights w = init_roof(cfg, 5, 0.3);
  std::mt19937_64 rng(6);
  const RoofInput a = testing::random_input(rng, cfg);
  RoofInput b = a;
  b.kb.token_ids[1] = b.kb.token_ids[1] == 5 ? 6 : 5;
  b.kb.attention_mask[1] = true;
  b.kb.true_length = std::max<std::size_t>(b.kb.true_length, 2);
  const auto fa = forward(a, w, cfg, ad::Mode::eval()).fused;
  const auto fb = forward(b, w, cfg, ad::Mode::eval()).fused;
  EXPECT_NE(fa.at(0, 0), fb.at(0, 0));
}

TEST(Forward, EmptyKnowledgeLeavesOnlyCls) {
  const ModelConfig cfg = tiny_config();
  const RoofWeights w = init_roof(cfg, 7);
  RoofInput in;
  in.task = build_task_input(std::vector<int>{5}, std::vector<int>{6, 7}, cfg.seg, cfg.max_q, cfg.M);
  in.kb = build_kb_input(assemble_knowledge({}), Vocabulary(), cfg.seg, cfg.N);
  const RoofOutput out = forward(in, w, cfg, ad::Mode::eval());
  EXPECT_EQ(std::count(out.mask.begin() + static_cast<std::ptrdiff_t>(cfg.M), out.mask.end(), true), 1);
  EXPECT_TRUE(out.mask[cfg.M]);
}

TEST(KbEncodeCached, MatchesOnlineForOneUnit) {
  ModelConfig cfg = tiny_config(40);
  cfg.seg = SegScheme::Type2;
  cfg.triple_len = cfg.N;
  const RoofWeights w = init_roof(cfg, 8, 0.4);
  const Vocabulary v = build_vocab({"alpha beta gamma delta"}, 40);
  const KnowledgeUnit unit{"alpha beta gamma", {}};
  const auto online = kb_encode_online(build_kb_input(assemble_knowledge({unit}), v, cfg.seg, cfg.N), w, cfg,
                                       ad::Mode::eval());
  const auto cached = kb_encode_cached({unit}, v, w.kb, cfg);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < cfg.d(); ++c) EXPECT_NEAR(online.emb.at(r, c), cached.emb.at(r, c), 1e-9);
  EXPECT_EQ(online.mask, cached.mask);
}

TEST(KbEncodeCached, ZeroUnitsAllMasked) {
  ModelConfig cfg = tiny_config();
  cfg.cached_kb = true;
  cfg.kb.max_positions = cfg.triple_len;
  const RoofWeights w = init_roof(cfg, 9);
  const auto enc = kb_encode_cached(std::vector<EncodedSequence>{}, w.kb, cfg);
  EXPECT_EQ(enc.emb.shape(), (ad::Shape{cfg.N, cfg.d()}));
  EXPECT_EQ(enc.mask, std::vector<bool>(cfg.N, false));
}

TEST(KbEncodeCached, TruncatesAtN) {
  ModelConfig cfg = tiny_config();
  cfg.cached_kb = true;
  cfg.kb.max_positions = cfg.triple_len;
  const RoofWeights w = init_roof(cfg, 10);
  const Vocabulary v = build_vocab({"a b c d e"}, 20);
  const std::vector<KnowledgeUnit> units{{"a b c", {}}, {"d e a", {}}, {"b c", {}}};  // 5 + 5 + 4 rows
  const auto enc = kb_encode_cached(units, v, w.kb, cfg);
  EXPECT_EQ(std::count(enc.mask.begin(), enc.mask.end(), true), static_cast<long>(cfg.N));
  cfg.cached_keep_cls = false;
  const auto no_cls = kb_encode_cached(units, v, w.kb, cfg);
  EXPECT_EQ(std::count(no_cls.mask.begin(), no_cls.mask.end(), true), static_cast<long>(cfg.N));
}

TEST(KbEncodeCached, FrozenAndDetached) {
  ModelConfig cfg = tiny_config();
  cfg.cached_kb = true;
  cfg.kb.max_positions = cfg.triple_len;
  const RoofWeights w = init_roof(cfg, 11);
  EXPECT_TRUE(w.kb_frozen);
  for (const auto& p : w.parameters())
    if (p.group == Group::Kb) EXPECT_FALSE(p.tensor.requires_grad()) << p.name;
  for (const auto& p : w.trainable()) EXPECT_NE(p.group, Group::Kb);
  std::mt19937_64 rng(12);
  const auto enc = kb_encode_cached(testing::random_input(rng, cfg).triples, w.kb, cfg);
  EXPECT_FALSE(enc.emb.requires_grad());
}

TEST(Fuse, LinearIdentityIsConcatenation) {
  ModelConfig cfg = tiny_config();
  cfg.fusion = FusionKind::Linear;
  RoofWeights w = init_roof(cfg, 13);
  auto& lw = w.fusion.linear_w.mutable_values();
  std::fill(lw.begin(), lw.end(), 0.0);
  for (std::size_t i = 0; i < cfg.d(); ++i) lw[i * cfg.d() + i] = 1.0;
  std::mt19937_64 rng(14);
  std::normal_distribution<double> n;
  std::vector<double> a(cfg.M * cfg.d()), b(cfg.N * cfg.d());
  for (auto& x : a) x = n(rng);
  for (auto& x : b) x = n(rng);
  const ad::Tensor ta({cfg.M, cfg.d()}, a), tb({cfg.N, cfg.d()}, b);
  const auto out = fuse(ta, tb, std::vector<bool>(cfg.M, true), std::vector<bool>(cfg.N, true), w.fusion, cfg,
                        ad::Mode::eval());
  std::vector<double> joined = a;
  joined.insert(joined.end(), b.begin(), b.end());
  EXPECT_EQ(out.values(), joined);
}

TEST(Fuse, RecurrentCarriesStateOverMaskedSteps) {
  ModelConfig cfg = tiny_config();
  cfg.fusion = FusionKind::Recurrent;
  const RoofWeights w = init_roof(cfg, 15, 0.3);
  std::mt19937_64 rng(16);
  std::normal_distribution<double> n;
  std::vector<double> a(cfg.M * cfg.d()), b(cfg.N * cfg.d());
  for (auto& x : a) x = n(rng);
  for (auto& x : b) x = n(rng);
  std::vector<bool> tm(cfg.M, true), km(cfg.N, true);
  tm[cfg.M - 1] = tm[cfg.M - 2] = false;
  const auto base = fuse(ad::Tensor({cfg.M, cfg.d()}, a), ad::Tensor({cfg.N, cfg.d()}, b), tm, km, w.fusion, cfg,
                         ad::Mode::eval());
  for (std::size_t c = 0; c < cfg.d(); ++c) a[(cfg.M - 1) * cfg.d() + c] += 5.0;
  const auto moved = fuse(ad::Tensor({cfg.M, cfg.d()}, a), ad::Tensor({cfg.N, cfg.d()}, b), tm, km, w.fusion, cfg,
                          ad::Mode::eval());
  for (std::size_t r = cfg.M; r < cfg.M + cfg.N; ++r)
    for (std::size_t c = 0; c < cfg.d(); ++c) EXPECT_EQ(base.at(r, c), moved.at(r, c));
}

TEST(InitFusion, CopiesLastKDonorLayers) {
  ModelConfig cfg = tiny_config();
  cfg.task.n_layers = 4;
  std::mt19937_64 rng(17);
  const auto donor = EncoderWeights::init(cfg.task, rng);
  const auto all = init_fusion_from_encoder(donor, 4, cfg.d());
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(all[i].q_w.values(), donor.layers[i].q_w.values());
  const auto last = init_fusion_from_encoder(donor, 2, cfg.d());
  ASSERT_EQ(last.size(), 2u);
  EXPECT_EQ(last[0].ff1_w.values(), donor.layers[2].ff1_w.values());
  EXPECT_EQ(last[1].ln2_g.values(), donor.layers[3].ln2_g.values());
  EXPECT_NE(last[0].q_w.node(), donor.layers[2].q_w.node());
  EXPECT_THROW(init_fusion_from_encoder(donor, 5, cfg.d()), DepthTooLarge);
  EXPECT_THROW(init_fusion_from_encoder(donor, 2, cfg.d() + 2), DimMismatch);
}

TEST(QaHead, ZeroAndOneHotWeights) {
  const ad::Tensor fused({3, 2}, {1, 2, 3, 4, 5, 6});
  HeadWeights h{ad::Tensor::zeros({2, 2}), ad::Tensor::zeros({2})};
  EXPECT_EQ(qa_head(fused, h).values(), std::vector<double>(6, 0.0));
  h.w = ad::Tensor({2, 2}, {0, 1, 1, 0});  // start <- coord 1, end <- coord 0
  EXPECT_EQ(qa_head(fused, h).values(), (std::vector<double>{2, 1, 4, 3, 6, 5}));
}

TEST(ClsHead, MeanOverUnmaskedRows) {
  const ad::Tensor same({3, 2}, {1, 2, 1, 2, 1, 2});
  const HeadWeights eye{ad::Tensor({2, 2}, {1, 0, 0, 1}), ad::Tensor::zeros({2})};
  EXPECT_EQ(cls_head(same, {true, false, true}, eye).values(), (std::vector<double>{1, 2}));
  const ad::Tensor a({3, 2}, {1, 2, 3, 4, 9, 9}), b({3, 2}, {1, 2, 3, 4, -7, 0});
  EXPECT_EQ(cls_head(a, {true, true, false}, eye).values(), cls_head(b, {true, true, false}, eye).values());
}

TEST(PredictSpan, Examples) {
  ad::Tensor peak({6, 2}, {0, 0, 0, 0, 5, 0, 0, 0, 0, 6, 0, 0});
  EXPECT_EQ(predict_span(peak, 1, 5), (Span{2, 4}));
  EXPECT_EQ(predict_span(ad::Tensor::zeros({6, 2}), 2, 4), (Span{2, 2}));
  // Best raw pair has the end before the start.
  ad::Tensor crossed({5, 2}, {0, 0, 0, 9, 0, 0, 9, 0, 1, 0});
  EXPECT_EQ(predict_span(crossed, 0, 4), testing::oracle_span(crossed, 0, 4));
  EXPECT_THROW(predict_span(peak, 4, 3), EmptyWindow);
}

TEST(PredictSpan, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(18);
  std::uniform_int_distribution<int> coarse(-2, 2);
  std::normal_distribution<double> fine;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    std::vector<double> v(n * 2);
    for (auto& x : v) x = trial % 2 ? fine(rng) : coarse(rng);
    const ad::Tensor logits({n, 2}, v);
    const std::size_t lo = rng() % n, hi = lo + rng() % (n - lo);
    ASSERT_EQ(predict_span(logits, lo, hi), testing::oracle_span(logits, lo, hi)) << "trial " << trial;
  }
}

TEST(Losses, QaLossIsMeanOfStartAndEnd) {
  const ad::Tensor logits({3, 2}, {1, 0, 0, 2, 0, 0});
  const double start = -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0));
  const double end = -std::log(std::exp(2.0) / (std::exp(2.0) + 2.0));
  EXPECT_NEAR(qa_loss(logits, 0, 1).item(), (start + end) / 2.0, 1e-15);
  EXPECT_NEAR(cls_loss(ad::Tensor::zeros({4}), 3).item(), std::log(4.0), 1e-15);
}

TEST(ModelConfig, HashTracksConfig) {
  ModelConfig a = tiny_config(), b = tiny_config();
  EXPECT_EQ(a.hash(), b.hash());
  b.task.d = b.kb.d = 12;
  EXPECT_NE(a.hash(), b.hash());
  b = a;
  b.k = 2;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(RoofWeights, CloneIsDeep) {
  const ModelConfig cfg = tiny_config();
  const RoofWeights w = init_roof(cfg, 19);
  const RoofWeights c = w.clone();
  const auto pw = w.parameters(), pc = c.parameters();
  ASSERT_EQ(pw.size(), pc.size());
  for (std::size_t i = 0; i < pw.size(); ++i) {
    EXPECT_EQ(pw[i].name, pc[i].name);
    EXPECT_EQ(pw[i].tensor.values(), pc[i].tensor.values());
    EXPECT_NE(pw[i].tensor.node(), pc[i].tensor.node());
  }
}

TEST(Forward, GradientsReachEveryTrainableTensor) {
  for (auto fusion : {FusionKind::Linear, FusionKind::Recurrent, FusionKind::TransformerEncoder}) {
    ModelConfig cfg = tiny_config();
    cfg.fusion = fusion;
    const RoofWeights w = init_roof(cfg, 20, 0.3);
    std::mt19937_64 rng(21);
    RoofInput in = testing::random_input(rng, cfg);
    backward(qa_loss(forward(in, w, cfg, ad::Mode::eval()).logits, 1, 2));
    for (const auto& p : w.trainable()) {
      if (p.name.find("emb.position") != std::string::npos || p.name.find("emb.token") != std::string::npos ||
          p.name.find("emb.segment") != std::string::npos)
        continue;  // rows for unused ids/positions legitimately stay zero
      const auto g = p.tensor.grad();
      EXPECT_TRUE(std::any_of(g.begin(), g.end(), [](double x) { return x != 0.0; })) << p.name;
    }
  }
}

}  // namespace
}  // namespace roofer
