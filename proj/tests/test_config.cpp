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

#include <sstream>

#include "roofer/config.hpp"

namespace roofer {
namespace {

ResolvedConfig resolve_text(const std::string& text) {
  RunConfig rc;
  std::istringstream in(text);
  rc.merge_text(in);
  return rc.resolve();
}

TEST(RunConfig, Defaults) {
  const ResolvedConfig r = RunConfig().resolve();
  EXPECT_EQ(r.model.d(), 32u);
  EXPECT_EQ(r.model.M, 64u);
  EXPECT_EQ(r.model.N, 32u);
  EXPECT_EQ(r.model.fusion, FusionKind::TransformerEncoder);
  EXPECT_EQ(r.model.k, 2u);
  EXPECT_EQ(r.model.seg, SegScheme::Type2);
  EXPECT_EQ(r.model.expansion, ExpansionType::Exp2);
  EXPECT_EQ(r.model.selection, SelectionMode::HasTail);
  EXPECT_EQ(r.train.base_lr, 3e-4);
  EXPECT_EQ(r.train.fusion_lr_multiplier, 10.0);
  EXPECT_EQ(r.train.optimizer, OptimizerKind::AdamW);
  EXPECT_EQ(r.metric, metrics::MetricKind::ExactMatch);
  EXPECT_TRUE(r.fusion_from_task);
  EXPECT_EQ(r.init_std, 0.02);
}

TEST(RunConfig, UnknownKeyRejected) {
  RunConfig rc;
  EXPECT_THROW(rc.set("model.depth", "3"), InvalidConfig);
  EXPECT_THROW(rc.get("nope"), InvalidConfig);
  EXPECT_THROW(resolve_text("train.lr = 1\n"), InvalidConfig);
  EXPECT_THROW(resolve_text("just words\n"), InvalidConfig);
}

TEST(RunConfig, BadValuesRejected) {
  for (const char* text : {"model.d = -4", "model.d = 3x", "model.heads = 3", "model.fusion = gru",
                           "train.fusion_lr_mult = 0.5", "train.epochs = 0", "model.dropout = 1.5",
                           "model.cached_kb = maybe", "train.base_lr = abc", "model.M = 3"}) {
    EXPECT_THROW(resolve_text(text), InvalidConfig) << text;
  }
}

TEST(RunConfig, FusionInitDepthChecked) {
  EXPECT_THROW(resolve_text("model.fusion_depth = 3\n"), InvalidConfig);
  EXPECT_EQ(resolve_text("model.fusion_depth = 3\nmodel.fusion_init = random\n").model.k, 3u);
  EXPECT_EQ(resolve_text("model.fusion_depth = 3\nmodel.fusion = linear\n").model.k, 3u);
}

TEST(RunConfig, MetricMustFitHead) {
  EXPECT_THROW(resolve_text("eval.metric = accuracy\n"), InvalidConfig);
  EXPECT_THROW(resolve_text("model.head = cls\neval.metric = exact_match\n"), InvalidConfig);
  EXPECT_EQ(resolve_text("model.head = cls\n").metric, metrics::MetricKind::Accuracy);
  EXPECT_EQ(resolve_text("model.head = cls\neval.metric = matthews_corr\n").metric, metrics::MetricKind::MatthewsCorr);
}

TEST(RunConfig, LaterMergesWin) {
  RunConfig rc;
  std::istringstream a("model.d = 16  # narrow\nmodel.heads = 4\n"), b("model.d = 8\n");
  rc.merge_text(a);
  rc.merge_text(b);
  const auto r = rc.resolve();
  EXPECT_EQ(r.model.d(), 8u);
  EXPECT_EQ(r.model.task.n_heads, 4u);
}

TEST(RunConfig, SnapshotRoundTrips) {
  RunConfig rc;
  rc.set("model.fusion", "recurrent");
  rc.set("train.seed", "99");
  rc.set("kb.language", "zh");
  RunConfig back;
  std::istringstream in(rc.snapshot());
  back.merge_text(in);
  EXPECT_EQ(back.snapshot(), rc.snapshot());
  const auto r = back.resolve();
  EXPECT_EQ(r.model.fusion, FusionKind::Recurrent);
  EXPECT_EQ(r.train.seed, 99u);
  EXPECT_EQ(r.knowledge.verbalizer.preset, "zh");
}

TEST(RunConfig, CachedModeSizesKbEncoder) {
  const auto r = resolve_text("model.cached_kb = true\nmodel.triple_len = 12\n");
  EXPECT_TRUE(r.model.cached_kb);
  EXPECT_EQ(r.model.kb.max_positions, 12u);
  EXPECT_EQ(r.model.task.max_positions, r.model.M);
}

TEST(RunConfig, MissingFile) {
  RunConfig rc;
  EXPECT_THROW(rc.merge_file("/nonexistent/roofer.conf"), IoError);
}

}  // namespace
}  // namespace roofer
