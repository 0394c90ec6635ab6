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

#ifndef CROBO_TRAINER_HPP
#define CROBO_TRAINER_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crobo/model.hpp"
#include "crobo/optimizer.hpp"
#include "crobo/synthvideo.hpp"
#include "crobo/views.hpp"

namespace crobo::train {

struct RunConfig {
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  int batch_size = 32;
  int epochs = 30;
  int warmup_epochs = 3;
  double base_lr = 1.5e-4;
  double min_lr = 0.0;
  AdamWConfig adamw;
  int repeated_sampling = 2;
  // Frames drawn (without replacement) from each clip per epoch; 0 = all.
  int frames_per_clip = 0;
  std::uint64_t seed = 0;
  nn::ModelConfig model;  // patch_size / grid_side come from `views`, seed from `seed`
  views::ViewConfig views;
  int checkpoint_every = 10;  // epochs
  bool deterministic = false;
  int threads = 1;
  double grad_clip = 0.0;  // 0 = off

  // Model config with patch geometry filled in from the view config.
  nn::ModelConfig resolved_model() const;
  void validate() const;  // throws ConfigError
};

// JSON form of run.json. Keys absent from the input keep their defaults.
std::string to_json(const RunConfig& cfg, bool include_out_dir = true);
RunConfig run_config_from_json(const std::string& text, const RunConfig& base = {});

// SHA-256 of the canonical JSON without out_dir.
std::string config_hash(const RunConfig& cfg);

struct MetricsRow {
  std::int64_t step = 0;  // 1-based optimizer step
  double lr = 0.0;
  double loss = 0.0;
  double loss_per_elem = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path metrics_csv;
  std::vector<MetricsRow> metrics;  // rows produced by this invocation
  std::int64_t total_steps = 0;
  std::int64_t steps_per_epoch = 0;
};

struct EpochItem {
  int clip = 0;
  int frame = 0;
};

// Shuffled (clip, frame) list for one epoch, each frame repeated
// repeated_sampling times.
std::vector<EpochItem> epoch_items(const RunConfig& cfg, const std::vector<synth::ClipFrames>& clips,
                                   int epoch);
std::int64_t steps_per_epoch(const RunConfig& cfg, const std::vector<synth::ClipFrames>& clips);

// View pair + mask + normalized targets for one batch slot. Pure function
// of (run seed, step, slot, item).
nn::Example<float> build_example(const RunConfig& cfg, const synth::ClipFrames& clip,
                                 const EpochItem& item, std::int64_t step, int slot);

/// Trains per `cfg`. Outputs in cfg.out_dir: metrics.csv
/// (step,lr,loss,loss_per_elem,seconds), ckpt_epoch_XXXX/ every
/// checkpoint_every epochs, and final/. With `resume_from`, parameters,
/// optimizer moments and the step counter are restored and the run continues
/// bit-identically to an uninterrupted one. In deterministic mode the
/// seconds column is written as 0 so metrics files compare byte-for-byte.
/// A non-finite loss writes diagnostic/ and throws NumericError.
TrainResult train(const RunConfig& cfg, const std::optional<std::filesystem::path>& resume_from = {});

// Same, over clips already in memory (cfg.data_dir is recorded only).
TrainResult train_on(const RunConfig& cfg, const std::vector<synth::ClipFrames>& clips,
                     const std::optional<std::filesystem::path>& resume_from = {});

std::vector<MetricsRow> read_metrics(const std::filesystem::path& csv);

}  // namespace crobo::train

#endif  // CROBO_TRAINER_HPP
