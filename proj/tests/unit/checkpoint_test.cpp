// Copyright 2026 The crobo Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <fstream>

#include "crobo/checkpoint.hpp"
#include "crobo/errors.hpp"
#include "crobo/hashing.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace crobo::ckpt {
namespace {

nn::ModelConfig tiny() {
  nn::ModelConfig c;
  c.enc_dim = 16;
  c.enc_depth = 1;
  c.enc_heads = 2;
  c.dec_dim = 8;
  c.dec_depth = 1;
  c.dec_heads = 2;
  c.patch_size = 4;
  c.grid_side = 2;
  return c;
}

TEST(Checkpoint, RoundTripWithOptimizer) {
  testing::TempDir dir("ckpt");
  const nn::Model<float> m(tiny());
  const auto p = m.init_params();
  train::AdamWState<float> opt(p.flat().size());
  opt.step = 17;
  for (std::size_t i = 0; i < opt.m.size(); ++i) {
    opt.m[i] = 0.5f * static_cast<float>(i);
    opt.v[i] = 0.25f * static_cast<float>(i);
  }
  write_checkpoint(dir.path() / "c", tiny(), p, 42, &opt, R"({"seed": 1})");
  const Checkpoint back = read_checkpoint(dir.path() / "c");
  EXPECT_EQ(back.step, 42);
  EXPECT_TRUE(back.model == tiny());
  EXPECT_TRUE(back.params.flat() == p.flat());
  ASSERT_TRUE(back.optimizer.has_value());
  EXPECT_EQ(back.optimizer->step, 17);
  EXPECT_EQ(back.optimizer->m, opt.m);
  EXPECT_EQ(back.optimizer->v, opt.v);
  EXPECT_FALSE(back.run_config_json.empty());
}

TEST(Checkpoint, ManifestDescribesLittleEndianFloats) {
  testing::TempDir dir("ckpt");
  const nn::Model<float> m(tiny());
  const auto p = m.init_params();
  write_checkpoint(dir.path(), tiny(), p, 0);
  const auto j = nlohmann::json::parse(read_file(dir.path() / "manifest.json"));
  const auto& tensors = j.at("tensors");
  ASSERT_EQ(tensors.size(), m.layout().tensors().size());
  std::size_t offset = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& t = tensors[i];
    EXPECT_EQ(t.at("name").get<std::string>(), m.layout().tensors()[i].name);
    EXPECT_EQ(t.at("dtype").get<std::string>(), "float32");
    EXPECT_EQ(t.at("offset").get<std::size_t>(), offset);
    offset += t.at("nbytes").get<std::size_t>();
  }
  EXPECT_EQ(j.at("step").get<int>(), 0);
  const std::string bytes = read_file(dir.path() / "params.bin");
  ASSERT_EQ(bytes.size(), offset);
  ASSERT_EQ(bytes.size(), p.flat().size() * 4);
  // Decode the first few values by hand from little-endian bytes.
  for (std::size_t i = 0; i < 8; ++i) {
    std::uint32_t u = 0;
    for (int b = 3; b >= 0; --b) u = (u << 8) | static_cast<unsigned char>(bytes[i * 4 + b]);
    EXPECT_EQ(std::bit_cast<float>(u), p.flat()[i]);
  }
}

TEST(Checkpoint, HashIsParamsSha) {
  testing::TempDir dir("ckpt");
  const nn::Model<float> m(tiny());
  write_checkpoint(dir.path(), tiny(), m.init_params(), 3);
  EXPECT_EQ(checkpoint_hash(dir.path()), sha256_file(dir.path() / "params.bin"));
  EXPECT_EQ(checkpoint_hash(dir.path()).size(), 64u);
}

TEST(Checkpoint, TruncatedParamsRejected) {
  testing::TempDir dir("ckpt");
  const nn::Model<float> m(tiny());
  write_checkpoint(dir.path(), tiny(), m.init_params(), 3);
  std::string bytes = read_file(dir.path() / "params.bin");
  bytes.resize(bytes.size() - 4);
  write_file_atomic(dir.path() / "params.bin", bytes);
  EXPECT_THROW(read_checkpoint(dir.path()), Error);
}

TEST(Checkpoint, MissingDirectoryThrows) { EXPECT_THROW(read_checkpoint("/nonexistent/ckpt"), IoError); }

TEST(Hashing, KnownSha256) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // namespace
}  // namespace crobo::ckpt
