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

#ifndef CROBO_SYNTHVIDEO_HPP
#define CROBO_SYNTHVIDEO_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crobo/image.hpp"

namespace crobo::synth {

enum class Shape { kCircle = 0, kSquare = 1, kTriangle = 2 };
inline constexpr int kNumShapes = 3;

const char* shape_name(Shape s);
Shape shape_from_name(const std::string& name);

// Sprite colours are drawn from a fixed palette of 8-bit-exact values.
inline constexpr int kNumColors = 6;
std::array<double, 3> palette_color(int index);
// Palette index of an RGB triple, or -1.
int palette_index(const std::array<double, 3>& rgb);

struct SpriteSpec {
  Shape shape = Shape::kCircle;
  std::array<double, 3> color{1.0, 0.0, 0.0};
  int radius = 4;
  std::array<double, 2> pos{0.0, 0.0};
  std::array<double, 2> vel{0.0, 0.0};

  bool operator==(const SpriteSpec&) const = default;
};

struct SynthConfig {
  int frame_size = 64;
  int n_frames = 30;
  int min_sprites = 1;
  int max_sprites = 3;
  double min_speed = 0.5;  // per-axis speed, pixels per frame
  double max_speed = 2.0;
  int min_radius = 3;
  int max_radius = 8;

  bool operator==(const SynthConfig&) const = default;
  void validate() const;  // throws ConfigError
};

struct ClipFrames {
  std::vector<Image> frames;
  std::vector<std::vector<SpriteSpec>> metadata;
  std::uint64_t seed = 0;
  SynthConfig cfg;
  int fps_equivalent = 10;

  int size() const { return static_cast<int>(frames.size()); }
  bool operator==(const ClipFrames&) const = default;
};

// One simulation step: constant velocity with elastic bounce at the
// borders, keeping each centre within [radius, frame_size - 1 - radius].
SpriteSpec step_sprite(SpriteSpec s, int frame_size);

/// Rasterises sprites over the fixed background (light gray, dark floor band
/// along the bottom, a short post standing on the floor near the left edge).
/// Sprite centres are rounded half-up to integers and all coverage tests are
/// integer arithmetic, so the output is platform independent. Later sprites
/// occlude earlier ones; pixels outside the frame are clipped.
Image render_frame(const std::vector<SpriteSpec>& sprites, int frame_size);

ClipFrames generate_clip(std::uint64_t seed, const SynthConfig& cfg);

// Clip i of a dataset uses derive_seed(seed, "clip", {i}).
std::vector<ClipFrames> generate_clips(std::uint64_t seed, int count, const SynthConfig& cfg);

struct ManifestEntry {
  std::string id;
  std::string dir;
  int n_frames = 0;
  std::uint64_t seed = 0;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> clips;
};

/// Layout: <dir>/clip_XXXX/frame_XXXX.png + metadata.json, and a top-level
/// manifest.json listing the clips. Throws IoError naming the path on failure.
DatasetManifest write_dataset(const std::vector<ClipFrames>& clips, const std::filesystem::path& dir);
DatasetManifest read_manifest(const std::filesystem::path& dir);
ClipFrames read_clip(const std::filesystem::path& clip_dir);
std::vector<ClipFrames> read_dataset(const std::filesystem::path& dir);

std::string metadata_json(const ClipFrames& clip);

}  // namespace crobo::synth

#endif  // CROBO_SYNTHVIDEO_HPP
