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

#ifndef CROBO_ABLATION_HPP
#define CROBO_ABLATION_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "crobo/trainer.hpp"

namespace crobo::train {

struct AblationConfig {
  RunConfig base;  // base.out_dir is the matrix root
  std::vector<views::Variant> variants{views::Variant::kCrop, views::Variant::kTime,
                                       views::Variant::kTimeCrop};
  std::vector<double> ratios{0.75, 0.90, 0.95};
  int epochs = 10;
  double probe_lambda = 1e-3;
  std::filesystem::path probe_data_dir;  // empty: probe on the training clips
  std::uint64_t probe_seed = 0;
};

struct AblationRow {
  std::string variant;
  double mask_ratio = 0.0;
  std::string config_hash;
  std::string ckpt_hash;
  std::int64_t steps = 0;
  double final_loss = 0.0;  // mean loss over the last epoch
  double last_step_loss = 0.0;
  double pos_mae_px = 0.0;
  double shape_acc = 0.0;
  double color_acc = 0.0;
  bool highlighted = false;  // the default (crop, 0.90) cell
  std::filesystem::path checkpoint;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::filesystem::path csv, json, markdown;
};

std::string cell_name(views::Variant v, double ratio);

AblationReport run_ablation_matrix(const AblationConfig& cfg);
AblationReport run_ablation_matrix(const AblationConfig& cfg, const std::vector<synth::ClipFrames>& clips,
                                   const std::vector<synth::ClipFrames>& probe_clips);

}  // namespace crobo::train

#endif  // CROBO_ABLATION_HPP
