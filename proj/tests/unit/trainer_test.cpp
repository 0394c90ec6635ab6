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

#include <cmath>
#include <limits>

#include "crobo/ablation.hpp"
#include "crobo/checkpoint.hpp"
#include "crobo/errors.hpp"
#include "crobo/hashing.hpp"
#include "crobo/trainer.hpp"
#include "test_util.hpp"

namespace crobo::train {
namespace {

std::vector<synth::ClipFrames> tiny_clips(int n, int frames, std::uint64_t seed = 1) {
  synth::SynthConfig sc;
  sc.frame_size = 32;
  sc.n_frames = frames;
  sc.max_radius = 6;
  sc.max_speed = 2.0;
  return synth::generate_clips(seed, n, sc);
}

RunConfig tiny_run(const std::filesystem::path& out) {
  RunConfig c;
  c.out_dir = out;
  c.batch_size = 4;
  c.epochs = 2;
  c.warmup_epochs = 1;
  c.base_lr = 1e-3;
  c.frames_per_clip = 2;
  c.seed = 5;
  c.checkpoint_every = 1;
  c.deterministic = true;
  c.views.view_size = 16;
  c.views.patch_size = 4;
  c.views.mask_ratio = 0.75;
  c.model.enc_dim = 16;
  c.model.enc_depth = 1;
  c.model.enc_heads = 2;
  c.model.dec_dim = 16;
  c.model.dec_depth = 1;
  c.model.dec_heads = 2;
  return c;
}

TEST(EpochPlan, CountingExample) {
  // 10 clips x 5 frames, repeat 2, batch 10 -> 100 items -> 10 steps.
  RunConfig c;
  c.batch_size = 10;
  c.repeated_sampling = 2;
  const auto clips = tiny_clips(10, 5);
  EXPECT_EQ(epoch_items(c, clips, 0).size(), 100u);
  EXPECT_EQ(steps_per_epoch(c, clips), 10);
}

TEST(EpochPlan, EachFrameRepeatedAndShuffledPerEpoch) {
  RunConfig c;
  c.repeated_sampling = 2;
  c.frames_per_clip = 3;
  const auto clips = tiny_clips(4, 10);
  const auto e0 = epoch_items(c, clips, 0);
  ASSERT_EQ(e0.size(), 4u * 3u * 2u);
  std::map<std::pair<int, int>, int> counts;
  for (const auto& it : e0) ++counts[{it.clip, it.frame}];
  for (const auto& [k, n] : counts) EXPECT_EQ(n, 2);
  EXPECT_EQ(counts.size(), 12u);
  const auto e1 = epoch_items(c, clips, 1);
  bool differs = false;
  for (std::size_t i = 0; i < e0.size(); ++i) differs |= e0[i].clip != e1[i].clip || e0[i].frame != e1[i].frame;
  EXPECT_TRUE(differs);
  const auto again = epoch_items(c, clips, 0);
  for (std::size_t i = 0; i < e0.size(); ++i) EXPECT_EQ(e0[i].frame, again[i].frame);
}

TEST(EpochPlan, TimeVariantSkipsLateFrames) {
  RunConfig c;
  c.views.variant = views::Variant::kTime;
  c.repeated_sampling = 1;
  const auto clips = tiny_clips(2, 10);
  for (const auto& it : epoch_items(c, clips, 0)) EXPECT_LE(it.frame, 10 - 1 - 4);
}

TEST(RunConfigJson, RoundTripAndFlatKeys) {
  RunConfig c = tiny_run("/tmp/x");
  c.views.variant = views::Variant::kTimeCrop;
  c.adamw.beta2 = 0.99;
  const RunConfig back = run_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  const RunConfig flat = run_config_from_json(R"({"mask_ratio": 0.75, "variant": "time", "epochs": 4})");
  EXPECT_EQ(flat.views.mask_ratio, 0.75);
  EXPECT_EQ(flat.views.variant, views::Variant::kTime);
  EXPECT_EQ(flat.epochs, 4);
  EXPECT_THROW(run_config_from_json("[1,2]"), ConfigError);
  EXPECT_THROW(run_config_from_json(R"({"epochs": "many"})"), ConfigError);
}

TEST(RunConfigJson, HashIgnoresOutDirOnly) {
  RunConfig a = tiny_run("/tmp/a");
  RunConfig b = tiny_run("/tmp/b");
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 6;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(RunConfig, ValidationErrors) {
  RunConfig c;
  c.repeated_sampling = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.warmup_epochs = c.epochs;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Train, WritesMetricsAndCheckpoints) {
  testing::TempDir dir("train");
  const auto clips = tiny_clips(4, 6);
  const RunConfig c = tiny_run(dir.path());
  const TrainResult r = train_on(c, clips);
  EXPECT_EQ(r.steps_per_epoch, 4);  // 4 clips x 2 frames x 2 repeats / 4
  EXPECT_EQ(r.total_steps, 8);
  const auto rows = read_metrics(r.metrics_csv);
  ASSERT_EQ(rows.size(), 8u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].step, static_cast<std::int64_t>(i + 1));
    EXPECT_TRUE(std::isfinite(rows[i].loss));
    EXPECT_NEAR(rows[i].loss_per_elem, rows[i].loss / 48.0, 1e-6 * rows[i].loss);
    EXPECT_EQ(rows[i].seconds, 0.0);
  }
  EXPECT_EQ(read_file(r.metrics_csv).substr(0, 35), "step,lr,loss,loss_per_elem,seconds\n");
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "ckpt_epoch_0001" / "params.bin"));
  const auto ck = ckpt::read_checkpoint(r.final_checkpoint);
  EXPECT_EQ(ck.step, 8);
  EXPECT_TRUE(ck.optimizer.has_value());
}

TEST(Train, DeterministicRunsAreByteIdenticalAcrossThreadCounts) {
  testing::TempDir a("train_a"), b("train_b"), d("train_c");
  const auto clips = tiny_clips(4, 6);
  RunConfig ca = tiny_run(a.path());
  RunConfig cb = tiny_run(b.path());
  RunConfig cc = tiny_run(d.path());
  cc.threads = 3;
  train_on(ca, clips);
  train_on(cb, clips);
  train_on(cc, clips);
  EXPECT_EQ(read_file(a / "metrics.csv"), read_file(b / "metrics.csv"));
  EXPECT_EQ(read_file(a / "final/params.bin"), read_file(b / "final/params.bin"));
  EXPECT_EQ(read_file(a / "final/manifest.json"), read_file(b / "final/manifest.json"));
  EXPECT_EQ(read_file(a / "final/params.bin"), read_file(d / "final/params.bin"));
}

TEST(Train, ResumeContinuesIdentically) {
  testing::TempDir full("resume_full"), part("resume_part");
  const auto clips = tiny_clips(4, 6);
  train_on(tiny_run(full.path()), clips);
  RunConfig first = tiny_run(part.path());
  train_on(first, clips);
  // Restart from the epoch-1 checkpoint in the second directory.
  const TrainResult r = train_on(first, clips, part.path() / "ckpt_epoch_0001");
  EXPECT_EQ(r.metrics.front().step, 5);
  EXPECT_EQ(read_file(full / "metrics.csv"), read_file(part / "metrics.csv"));
  EXPECT_EQ(read_file(full / "final/params.bin"), read_file(part / "final/params.bin"));
}

TEST(Train, NonFiniteLossAbortsWithDiagnostic) {
  testing::TempDir dir("nan");
  const auto clips = tiny_clips(4, 6);
  RunConfig c = tiny_run(dir.path());
  c.base_lr = 1e36;
  c.warmup_epochs = 0;
  EXPECT_THROW(train_on(c, clips), NumericError);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "diagnostic" / "params.bin"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "diagnostic" / "error.txt"));
}

TEST(Train, MissingDatasetFails) {
  testing::TempDir dir("nodata");
  RunConfig c = tiny_run(dir.path() / "out");
  c.data_dir = dir.path() / "absent";
  EXPECT_THROW(train(c), IoError);
}

TEST(Ablation, ThreeVariantsOneRatio) {
  testing::TempDir dir("ablate");
  const auto clips = tiny_clips(5, 12);
  AblationConfig a;
  a.base = tiny_run(dir.path());
  a.ratios = {0.9};
  a.epochs = 1;
  const AblationReport rep = run_ablation_matrix(a, clips, clips);
  ASSERT_EQ(rep.rows.size(), 3u);
  for (const auto& row : rep.rows) {
    EXPECT_TRUE(std::filesystem::exists(row.checkpoint / "params.bin"));
    RunConfig cell = a.base;
    cell.epochs = 1;
    cell.warmup_epochs = 0;
    cell.views.variant = views::variant_from_name(row.variant);
    cell.views.mask_ratio = 0.9;
    EXPECT_EQ(row.config_hash, config_hash(cell));
    EXPECT_EQ(row.highlighted, row.variant == "crop");
    EXPECT_TRUE(std::isfinite(row.final_loss));
  }
  EXPECT_TRUE(std::filesystem::exists(rep.csv));
  EXPECT_TRUE(std::filesystem::exists(rep.json));
  EXPECT_TRUE(std::filesystem::exists(rep.markdown));
}

}  // namespace
}  // namespace crobo::train
