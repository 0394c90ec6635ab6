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

#ifndef CROBO_VIEWS_HPP
#define CROBO_VIEWS_HPP

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "crobo/image.hpp"
#include "crobo/random.hpp"
#include "crobo/synthvideo.hpp"

namespace crobo::views {

using PatchMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class CropParent { kFrame, kGlobalView };
enum class Variant { kCrop, kTime, kTimeCrop };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);  // crop | time | timecrop

struct CropGeometry {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;
  CropParent parent = CropParent::kFrame;

  Box box() const { return {x0, y0, w, h}; }
  bool operator==(const CropGeometry&) const = default;
};

struct ViewConfig {
  int view_size = 64;
  int patch_size = 8;
  std::array<double, 2> global_scale{0.5, 1.0};
  std::array<double, 2> local_scale{0.3, 0.6};
  std::array<double, 2> aspect{3.0 / 4.0, 4.0 / 3.0};
  double mask_ratio = 0.9;
  Variant variant = Variant::kCrop;
  std::array<int, 2> time_gap{4, 48};
  double flip_prob = 0.5;

  int grid_side() const { return view_size / patch_size; }
  int num_patches() const { return grid_side() * grid_side(); }
  void validate() const;  // throws ConfigError
};

/// Random-resized-crop geometry on a parent_w x parent_h parent.
///
/// Area fraction is uniform in `scale`, aspect ratio log-uniform in `aspect`,
/// and the offset uniform over valid placements. A candidate whose rounded
/// extent leaves the scale or aspect bounds is rejected; after 10 rejections
/// the full parent is returned.
CropGeometry sample_crop(int parent_w, int parent_h, const std::array<double, 2>& scale,
                         const std::array<double, 2>& aspect, CropParent parent, Rng& rng);

CropGeometry sample_global_crop(int frame_w, int frame_h, const ViewConfig& cfg, Rng& rng);

// Local crop in the coordinates of the global view after its resize to
// view_size x view_size, so it is contained in the global crop by construction.
CropGeometry sample_local_crop(const CropGeometry& global, const ViewConfig& cfg, Rng& rng);

/// Everything random about a pair, drawn before any pixels are touched.
struct PairPlan {
  Variant variant = Variant::kCrop;
  int frame_source = 0;
  int frame_target = 0;
  CropGeometry source_geom;
  // Global crop the target derives from. Equals source_geom for kCrop;
  // an independent crop of the target frame for kTime / kTimeCrop.
  CropGeometry target_global_geom;
  CropGeometry target_geom;
  bool flip = false;
};

struct ViewPair {
  Image source;
  Image target;
  CropGeometry source_geom;
  CropGeometry target_global_geom;
  CropGeometry target_geom;
  bool flip = false;
  Variant variant = Variant::kCrop;
  int frame_index_source = 0;
  int frame_index_target = 0;
};

// Draw order: source global crop, temporal gap, target global crop, local
// crop, flip coin. Throws InputError when the clip is too short for the
// variant at frame t.
PairPlan sample_pair_plan(int clip_len, int frame_w, int frame_h, int t, Variant variant,
                          Rng& rng, const ViewConfig& cfg);
ViewPair realize_pair(const synth::ClipFrames& clip, const PairPlan& plan, const ViewConfig& cfg);
ViewPair make_view_pair(const synth::ClipFrames& clip, int t, Variant variant, Rng& rng,
                        const ViewConfig& cfg);

// Largest frame index usable as a source for `variant` (time variants need
// t + time_gap[0] inside the clip).
int last_source_frame(int clip_len, Variant variant, const ViewConfig& cfg);

struct PatchGrid {
  PatchMatrix patches;  // N x (P*P*3); row i is patch i in row-major grid order
  int grid_side = 0;
  int patch_size = 0;

  int count() const { return grid_side * grid_side; }
};

PatchGrid patchify(const Image& view, int patch_size);
Image unpatchify(const PatchGrid& grid);

struct MaskSet {
  std::vector<int> masked;   // sorted
  std::vector<int> visible;  // sorted complement
  double ratio = 0.0;
  int n = 0;
};

// floor(r * N), robust to the binary representation of decimal ratios.
int masked_count(int n, double ratio);
MaskSet sample_mask(int n, double ratio, Rng& rng);
MaskSet make_mask(int n, std::vector<int> masked, double ratio);

struct TargetPatches {
  PatchMatrix normalized;
  std::vector<float> mean;
  std::vector<float> std;  // sqrt(population variance + eps)
};

TargetPatches normalize_targets(const PatchGrid& grid, double eps = 1e-6);
PatchMatrix denormalize(const TargetPatches& stats, const PatchMatrix& values);

// Debug dump: <dir>/<stem>.json with the geometries plus two PNGs.
void dump_view_pair(const ViewPair& pair, const std::filesystem::path& dir, const std::string& stem);

}  // namespace crobo::views

#endif  // CROBO_VIEWS_HPP
