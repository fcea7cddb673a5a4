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

#include <cstring>
#include <filesystem>

#include "support.hpp"

namespace roofer {
namespace {

using testing::tiny_config;

void expect_bit_equal(const RoofWeights& a, const RoofWeights& b) {
  const auto pa = a.parameters(), pb = b.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_EQ(pa[i].group, pb[i].group);
    const auto& va = pa[i].tensor.values();
    const auto& vb = pb[i].tensor.values();
    ASSERT_EQ(va.size(), vb.size());
    EXPECT_EQ(std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)), 0) << pa[i].name;
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  for (auto fusion : {FusionKind::Linear, FusionKind::Recurrent, FusionKind::TransformerEncoder}) {
    ModelConfig cfg = tiny_config();
    cfg.fusion = fusion;
    const RoofWeights w = init_roof(cfg, 1, 0.7);
    expect_bit_equal(w, deserialize_checkpoint(serialize_checkpoint(w, cfg), cfg));
  }
}

TEST(Checkpoint, CachedModeKeepsKbFrozen) {
  ModelConfig cfg = tiny_config();
  cfg.cached_kb = true;
  cfg.kb.max_positions = cfg.triple_len;
  const RoofWeights w = init_roof(cfg, 2);
  const RoofWeights back = deserialize_checkpoint(serialize_checkpoint(w, cfg), cfg);
  expect_bit_equal(w, back);
  EXPECT_TRUE(back.kb_frozen);
  EXPECT_FALSE(back.kb.token_emb.requires_grad());
}

TEST(Checkpoint, TruncatedIsCorrupt) {
  const ModelConfig cfg = tiny_config();
  const std::string bytes = serialize_checkpoint(init_roof(cfg, 3), cfg);
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, cut), cfg), Corrupt) << cut;
  }
}

TEST(Checkpoint, FlippedByteIsCorrupt) {
  const ModelConfig cfg = tiny_config();
  std::string bytes = serialize_checkpoint(init_roof(cfg, 4), cfg);
  bytes[bytes.size() / 3] ^= 0x10;
  EXPECT_THROW(deserialize_checkpoint(bytes, cfg), Corrupt);
}

TEST(Checkpoint, OtherConfigRejected) {
  const ModelConfig cfg = tiny_config();
  const std::string bytes = serialize_checkpoint(init_roof(cfg, 5), cfg);
  ModelConfig wider = cfg;
  wider.task.d = wider.kb.d = 12;
  EXPECT_THROW(deserialize_checkpoint(bytes, wider), ConfigMismatch);
}

TEST(Checkpoint, Files) {
  const ModelConfig cfg = tiny_config();
  const auto path = (std::filesystem::temp_directory_path() / "roofer_ckpt_test.bin").string();
  const RoofWeights w = init_roof(cfg, 6);
  save_checkpoint(w, cfg, path);
  expect_bit_equal(w, load_checkpoint(path, cfg));
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path, cfg), IoError);
  EXPECT_THROW(save_checkpoint(w, cfg, "/nonexistent-dir/x.ckpt"), IoError);
}

}  // namespace
}  // namespace roofer
