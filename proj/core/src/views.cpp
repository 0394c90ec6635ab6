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

#include "crobo/views.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crobo/errors.hpp"
#include "crobo/hashing.hpp"
#include "json.hpp"

namespace crobo::views {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kCrop:
      return "crop";
    case Variant::kTime:
      return "time";
    case Variant::kTimeCrop:
      return "timecrop";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  if (name == "crop") return Variant::kCrop;
  if (name == "time") return Variant::kTime;
  if (name == "timecrop") return Variant::kTimeCrop;
  throw ConfigError("unknown variant '" + name + "' (expected crop, time or timecrop)");
}

void ViewConfig::validate() const {
  if (patch_size <= 0 || view_size <= 0 || view_size % patch_size != 0)
    throw ConfigError("view_size must be a positive multiple of patch_size");
  auto check_range = [](const std::array<double, 2>& r, double lo, double hi, const char* what) {
    if (!(r[0] > lo) || !(r[1] <= hi) || r[0] > r[1])
      throw ConfigError(std::string(what) + " range is invalid");
  };
  check_range(global_scale, 0.0, 1.0, "global_scale");
  check_range(local_scale, 0.0, 1.0, "local_scale");
  check_range(aspect, 0.0, 1e9, "aspect");
  if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) throw ConfigError("mask_ratio must lie in [0, 1)");
  if (time_gap[0] < 0 || time_gap[0] > time_gap[1]) throw ConfigError("time_gap range is invalid");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ConfigError("flip_prob must lie in [0, 1]");
}

CropGeometry sample_crop(int parent_w, int parent_h, const std::array<double, 2>& scale,
                         const std::array<double, 2>& aspect, CropParent parent, Rng& rng) {
  const double area = static_cast<double>(parent_w) * parent_h;
  const double log_lo = std::log(aspect[0]);
  const double log_hi = std::log(aspect[1]);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target_area = area * rng.uniform(scale[0], scale[1]);
    const double ratio = std::exp(rng.uniform(log_lo, log_hi));
    const int w = static_cast<int>(std::lround(std::sqrt(target_area * ratio)));
    const int h = static_cast<int>(std::lround(std::sqrt(target_area / ratio)));
    if (w <= 0 || h <= 0 || w > parent_w || h > parent_h) continue;
    const double frac = static_cast<double>(w) * h / area;
    const double ar = static_cast<double>(w) / h;
    if (frac < scale[0] || frac > scale[1] || ar < aspect[0] || ar > aspect[1]) continue;
    const int x0 = static_cast<int>(rng.uniform_int(0, parent_w - w));
    const int y0 = static_cast<int>(rng.uniform_int(0, parent_h - h));
    return {x0, y0, w, h, parent};
  }
  return {0, 0, parent_w, parent_h, parent};
}

CropGeometry sample_global_crop(int frame_w, int frame_h, const ViewConfig& cfg, Rng& rng) {
  if (frame_w < 2 * cfg.patch_size || frame_h < 2 * cfg.patch_size)
    throw InputError("frame smaller than two patches");
  return sample_crop(frame_w, frame_h, cfg.global_scale, cfg.aspect, CropParent::kFrame, rng);
}

CropGeometry sample_local_crop(const CropGeometry& global, const ViewConfig& cfg, Rng& rng) {
  if (global.w <= 0 || global.h <= 0) throw InputError("invalid global crop");
  return sample_crop(cfg.view_size, cfg.view_size, cfg.local_scale, cfg.aspect,
                     CropParent::kGlobalView, rng);
}

int last_source_frame(int clip_len, Variant variant, const ViewConfig& cfg) {
  return variant == Variant::kCrop ? clip_len - 1 : clip_len - 1 - cfg.time_gap[0];
}

PairPlan sample_pair_plan(int clip_len, int frame_w, int frame_h, int t, Variant variant,
                          Rng& rng, const ViewConfig& cfg) {
  if (t < 0 || t >= clip_len) throw InputError("frame index out of range");
  if (t > last_source_frame(clip_len, variant, cfg))
    throw InputError(std::string("clip too short for variant '") + variant_name(variant) +
                     "' at frame " + std::to_string(t));
  PairPlan plan;
  plan.variant = variant;
  plan.frame_source = t;
  plan.source_geom = sample_global_crop(frame_w, frame_h, cfg, rng);
  if (variant == Variant::kCrop) {
    plan.frame_target = t;
    plan.target_global_geom = plan.source_geom;
    plan.target_geom = sample_local_crop(plan.source_geom, cfg, rng);
  } else {
    const int max_gap = std::min(cfg.time_gap[1], clip_len - 1 - t);
    const int k = static_cast<int>(rng.uniform_int(cfg.time_gap[0], max_gap));
    plan.frame_target = t + k;
    plan.target_global_geom = sample_global_crop(frame_w, frame_h, cfg, rng);
    plan.target_geom = variant == Variant::kTime
                           ? plan.target_global_geom
                           : sample_local_crop(plan.target_global_geom, cfg, rng);
  }
  plan.flip = rng.bernoulli(cfg.flip_prob);
  return plan;
}

ViewPair realize_pair(const synth::ClipFrames& clip, const PairPlan& plan, const ViewConfig& cfg) {
  const int v = cfg.view_size;
  ViewPair pair;
  pair.variant = plan.variant;
  pair.frame_index_source = plan.frame_source;
  pair.frame_index_target = plan.frame_target;
  pair.source_geom = plan.source_geom;
  pair.target_global_geom = plan.target_global_geom;
  pair.target_geom = plan.target_geom;
  pair.flip = plan.flip;

  pair.source = resize_bicubic(clip.frames.at(plan.frame_source), plan.source_geom.box(), v, v);
  if (plan.target_geom.parent == CropParent::kFrame) {
    pair.target = resize_bicubic(clip.frames.at(plan.frame_target), plan.target_geom.box(), v, v);
  } else {
    const Image& target_global =
        plan.variant == Variant::kCrop
            ? pair.source
            : resize_bicubic(clip.frames.at(plan.frame_target), plan.target_global_geom.box(), v, v);
    pair.target = resize_bicubic(target_global, plan.target_geom.box(), v, v);
  }
  if (plan.flip) {
    pair.source = flip_horizontal(pair.source);
    pair.target = flip_horizontal(pair.target);
  }
  return pair;
}

ViewPair make_view_pair(const synth::ClipFrames& clip, int t, Variant variant, Rng& rng,
                        const ViewConfig& cfg) {
  if (clip.frames.empty()) throw InputError("empty clip");
  const Image& f = clip.frames.front();
  return realize_pair(clip, sample_pair_plan(clip.size(), f.width, f.height, t, variant, rng, cfg), cfg);
}

PatchGrid patchify(const Image& view, int patch_size) {
  if (patch_size <= 0 || view.width != view.height || view.width % patch_size != 0)
    throw InputError("view side must be square and divisible by the patch size");
  const int g = view.width / patch_size;
  const int p = patch_size;
  PatchGrid grid{PatchMatrix(g * g, p * p * 3), g, p};
  for (int gy = 0; gy < g; ++gy)
    for (int gx = 0; gx < g; ++gx) {
      auto row = grid.patches.row(gy * g + gx);
      int k = 0;
      for (int y = 0; y < p; ++y)
        for (int x = 0; x < p; ++x)
          for (int c = 0; c < 3; ++c) row(k++) = view.at(gx * p + x, gy * p + y, c);
    }
  return grid;
}

Image unpatchify(const PatchGrid& grid) {
  const int g = grid.grid_side;
  const int p = grid.patch_size;
  Image img(g * p, g * p);
  for (int gy = 0; gy < g; ++gy)
    for (int gx = 0; gx < g; ++gx) {
      auto row = grid.patches.row(gy * g + gx);
      int k = 0;
      for (int y = 0; y < p; ++y)
        for (int x = 0; x < p; ++x)
          for (int c = 0; c < 3; ++c) img.at(gx * p + x, gy * p + y, c) = row(k++);
    }
  return img;
}

int masked_count(int n, double ratio) {
  return static_cast<int>(std::floor(ratio * n + 1e-9));
}

MaskSet make_mask(int n, std::vector<int> masked, double ratio) {
  std::sort(masked.begin(), masked.end());
  MaskSet m;
  m.n = n;
  m.ratio = ratio;
  std::vector<char> is_masked(n, 0);
  for (int i : masked) {
    if (i < 0 || i >= n || is_masked[i]) throw InputError("mask index invalid or repeated");
    is_masked[i] = 1;
  }
  m.masked = std::move(masked);
  for (int i = 0; i < n; ++i)
    if (!is_masked[i]) m.visible.push_back(i);
  return m;
}

MaskSet sample_mask(int n, double ratio, Rng& rng) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw InputError("mask ratio must lie in [0, 1)");
  const int count = masked_count(n, ratio);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (int i = 0; i < count; ++i) {
    const int j = static_cast<int>(rng.uniform_int(i, n - 1));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return make_mask(n, std::move(idx), ratio);
}

TargetPatches normalize_targets(const PatchGrid& grid, double eps) {
  const auto n = grid.patches.rows();
  const auto d = grid.patches.cols();
  TargetPatches out{PatchMatrix(n, d), std::vector<float>(n), std::vector<float>(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = grid.patches.row(i).cast<double>();
    const double mean = row.mean();
    const double var = (row.array() - mean).square().mean();
    const double sd = std::sqrt(var + eps);
    out.normalized.row(i) = ((row.array() - mean) / sd).cast<float>();
    out.mean[i] = static_cast<float>(mean);
    out.std[i] = static_cast<float>(sd);
  }
  return out;
}

PatchMatrix denormalize(const TargetPatches& stats, const PatchMatrix& values) {
  PatchMatrix out(values.rows(), values.cols());
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    out.row(i) = (values.row(i).cast<double>().array() * stats.std[i] + stats.mean[i]).cast<float>();
  return out;
}

void dump_view_pair(const ViewPair& pair, const std::filesystem::path& dir, const std::string& stem) {
  using nlohmann::json;
  auto geom = [](const CropGeometry& g) {
    return json{{"x0", g.x0}, {"y0", g.y0}, {"w", g.w}, {"h", g.h},
                {"parent", g.parent == CropParent::kFrame ? "frame" : "global_view"}};
  };
  std::filesystem::create_directories(dir);
  const json j{{"variant", variant_name(pair.variant)},
               {"flip", pair.flip},
               {"frame_index_source", pair.frame_index_source},
               {"frame_index_target", pair.frame_index_target},
               {"source_geom", geom(pair.source_geom)},
               {"target_global_geom", geom(pair.target_global_geom)},
               {"target_geom", geom(pair.target_geom)},
               {"source_png", stem + "_source.png"},
               {"target_png", stem + "_target.png"}};
  write_png(pair.source, dir / (stem + "_source.png"));
  write_png(pair.target, dir / (stem + "_target.png"));
  write_file_atomic(dir / (stem + ".json"), j.dump(1));
}

}  // namespace crobo::views
