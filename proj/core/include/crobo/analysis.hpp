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

#ifndef CROBO_ANALYSIS_HPP
#define CROBO_ANALYSIS_HPP

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "crobo/image.hpp"
#include "crobo/model.hpp"
#include "crobo/synthvideo.hpp"
#include "crobo/views.hpp"

namespace crobo::analysis {

/// Bottleneck embeddings of consecutive frames, one row per frame.
struct Trajectory {
  std::string clip_id;
  Eigen::MatrixXd z;  // T x D

  int size() const { return static_cast<int>(z.rows()); }
  int dim() const { return static_cast<int>(z.cols()); }
};

// Largest centred square inside a w x h frame.
Box center_square(int w, int h);

// Centre-square crop resized to view_size; throws InputError if the frame
// cannot hold one patch grid.
Image center_view(const Image& frame, const views::ViewConfig& cfg);

Trajectory embed_clip(const nn::Model<float>& model, const nn::ParamSet<float>& params,
                      const synth::ClipFrames& clip, const views::ViewConfig& cfg,
                      std::string clip_id = {});

struct CurvatureSeries {
  std::vector<double> angles_deg;
  std::vector<int> skipped_at;  // t of each skipped angle (difference norm below eps)
  double mean_deg = 0.0;        // NaN when every angle was skipped
  bool degenerate = false;      // no angle could be computed

  int skipped() const { return static_cast<int>(skipped_at.size()); }
};

CurvatureSeries curvature(const Trajectory& traj, double eps = 1e-12);

struct ClipCurvature {
  std::string clip_id;
  int n_angles = 0;
  double mean_deg = 0.0;
  int skipped = 0;
};

struct CurvatureSummary {
  std::vector<ClipCurvature> clips;
  double mean_deg = 0.0;  // over clips with at least one angle; NaN if none
  int first_k = 0;
};

CurvatureSummary mean_curvature(const std::vector<Trajectory>& trajs, int first_k_frames = 50);

// Columns: clip_id,n_angles,mean_deg,skipped
void write_curvature_csv(const CurvatureSummary& summary, const std::filesystem::path& path);

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues descending; eigenvector columns follow the same order.
struct SymmetricEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  int sweeps = 0;
};

SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& a, double tol = 1e-15, int max_sweeps = 100);

struct Pca2 {
  std::vector<std::array<double, 2>> points;
  Eigen::MatrixXd components;  // D x 2, first nonzero coordinate of each column positive
  std::array<double, 2> explained{0.0, 0.0};  // top-2 eigenvalues of the sample covariance
  double total_variance = 0.0;
  bool zero_variance = false;
};

Pca2 pca2(const Trajectory& traj);

// Columns: t,p1,p2
void write_pca_csv(const Pca2& pca, const std::filesystem::path& path);

struct Reconstruction {
  Image panel;            // source | masked target | reconstruction | ground truth
  Image reconstruction;   // view_size x view_size
  double masked_mse = 0.0;   // de-normalized pixels over masked patches
  double masked_psnr = 0.0;  // dB, peak 1.0; +inf when nothing differs
  int masked_pixels = 0;
};

inline constexpr int kPanelGutter = 4;

Reconstruction reconstruct(const nn::Model<float>& model, const nn::ParamSet<float>& params,
                           const views::ViewPair& pair, const views::MaskSet& mask);

// reconstruct() plus a PNG of the panel at `out`.
Reconstruction render_reconstruction(const nn::Model<float>& model, const nn::ParamSet<float>& params,
                                     const views::ViewPair& pair, const views::MaskSet& mask,
                                     const std::filesystem::path& out);

struct PsnrReport {
  double psnr = 0.0;  // from the pooled masked MSE
  double mse = 0.0;
  int pairs = 0;
};

// Pooled masked-patch PSNR over `pairs_per_clip` seeded view pairs per clip.
PsnrReport masked_psnr(const nn::Model<float>& model, const nn::ParamSet<float>& params,
                       const std::vector<synth::ClipFrames>& clips, const views::ViewConfig& cfg,
                       int pairs_per_clip, std::uint64_t seed);

}  // namespace crobo::analysis

#endif  // CROBO_ANALYSIS_HPP
