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

#ifndef CROBO_PROBE_HPP
#define CROBO_PROBE_HPP

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "crobo/model.hpp"
#include "crobo/synthvideo.hpp"
#include "crobo/views.hpp"

namespace crobo::probe {

// Target columns: x, y (view pixels), shape one-hot, colour one-hot.
inline constexpr int kPosCols = 2;
inline constexpr int kShapeCol = 2;
inline constexpr int kColorCol = kShapeCol + synth::kNumShapes;
inline constexpr int kTargetCols = kColorCol + synth::kNumColors;

/// Frozen-encoder features with sprite targets, split by clip.
struct ProbeDataset {
  Eigen::MatrixXd features;  // M x D
  Eigen::MatrixXd targets;   // M x kTargetCols
  std::vector<int> row_clip;
  std::vector<int> row_frame;
  std::vector<int> train_clips;  // sorted
  std::vector<int> test_clips;   // sorted
  std::vector<int> train_rows;
  std::vector<int> test_rows;
};

// Target row for the largest sprite (first on ties) of frame t, with the
// position mapped into the centre-square view.
Eigen::RowVectorXd sprite_targets(const synth::ClipFrames& clip, int t, const views::ViewConfig& cfg);

struct SplitConfig {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

// Seeded clip-level partition; both sides non-empty when there are >= 2 clips.
void split_by_clip(int n_clips, const SplitConfig& split, std::vector<int>& train,
                   std::vector<int>& test);

ProbeDataset build_probe_dataset(const nn::Model<float>& model, const nn::ParamSet<float>& params,
                                 const std::vector<synth::ClipFrames>& clips,
                                 const views::ViewConfig& cfg, const SplitConfig& split);

// Same rows and split with features replaced (targets are kept).
ProbeDataset with_features(const ProbeDataset& ds, Eigen::MatrixXd features);

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows);

struct RidgeProbe {
  Eigen::MatrixXd weights;  // D x K, raw feature units
  Eigen::RowVectorXd bias;  // K
  double lambda = 0.0;

  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
};

/// Solves (XᵀX + λI)W = XᵀY on centred (and, by default, standardized)
/// features; the solution is folded back to raw units with the means in the
/// bias. λ = 0 with a singular system throws NumericError.
RidgeProbe fit_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda,
                     bool standardize = true);
RidgeProbe fit_ridge(const ProbeDataset& ds, double lambda);

struct ProbeScores {
  double pos_mae_px = 0.0;
  double shape_acc = 0.0;
  double color_acc = 0.0;
  int n = 0;
};

ProbeScores score_predictions(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);
ProbeScores eval_probe(const RidgeProbe& probe, const ProbeDataset& ds);

std::string probe_json(const ProbeScores& s, const ProbeDataset& ds, double lambda,
                       const std::string& ckpt_hash, const std::string& head = "ridge");

/// Two hidden ReLU layers trained with full-batch Adam on MSE; optional
/// alternative to the ridge head.
struct MlpConfig {
  int hidden = 256;
  int epochs = 500;
  double lr = 1e-3;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
};

struct MlpProbe {
  Eigen::RowVectorXd x_mean, x_scale, y_mean, y_scale;
  Eigen::MatrixXd w1, w2, w3;
  Eigen::RowVectorXd b1, b2, b3;

  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
};

MlpProbe fit_mlp(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const MlpConfig& cfg);
ProbeScores eval_mlp(const MlpProbe& probe, const ProbeDataset& ds);

}  // namespace crobo::probe

#endif  // CROBO_PROBE_HPP
