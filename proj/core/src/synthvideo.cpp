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

#include "crobo/synthvideo.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "crobo/errors.hpp"
#include "crobo/hashing.hpp"
#include "crobo/random.hpp"
#include "json.hpp"

namespace crobo::synth {
namespace {

using nlohmann::json;

constexpr int kBackgroundLevel = 200;
constexpr int kFloorLevel = 60;
constexpr int kPostLevel = 110;

constexpr std::array<std::array<int, 3>, kNumColors> kPalette{{
    {220, 40, 40},
    {40, 180, 60},
    {40, 80, 220},
    {230, 200, 40},
    {200, 50, 200},
    {40, 200, 210},
}};

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

bool covers(const SpriteSpec& s, int cx, int cy, int px, int py) {
  const int dx = px - cx;
  const int dy = py - cy;
  const int r = s.radius;
  switch (s.shape) {
    case Shape::kCircle:
      return dx * dx + dy * dy <= r * r;
    case Shape::kSquare:
      return std::abs(dx) <= r && std::abs(dy) <= r;
    case Shape::kTriangle:
      // Apex at (cx, cy - r), base from (cx - r, cy + r) to (cx + r, cy + r).
      return dy >= -r && dy <= r && 2 * std::abs(dx) <= dy + r;
  }
  return false;
}

std::string frame_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d.png", t);
  return buf;
}

std::string clip_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "clip_%04zu", i);
  return buf;
}

json cfg_to_json(const SynthConfig& c) {
  return {{"frame_size", c.frame_size}, {"n_frames", c.n_frames},
          {"n_sprites_range", {c.min_sprites, c.max_sprites}},
          {"velocity_range", {c.min_speed, c.max_speed}},
          {"radius_range", {c.min_radius, c.max_radius}}};
}

SynthConfig cfg_from_json(const json& j) {
  SynthConfig c;
  c.frame_size = j.at("frame_size").get<int>();
  c.n_frames = j.at("n_frames").get<int>();
  c.min_sprites = j.at("n_sprites_range").at(0).get<int>();
  c.max_sprites = j.at("n_sprites_range").at(1).get<int>();
  c.min_speed = j.at("velocity_range").at(0).get<double>();
  c.max_speed = j.at("velocity_range").at(1).get<double>();
  c.min_radius = j.at("radius_range").at(0).get<int>();
  c.max_radius = j.at("radius_range").at(1).get<int>();
  return c;
}

}  // namespace

const char* shape_name(Shape s) {
  switch (s) {
    case Shape::kCircle:
      return "circle";
    case Shape::kSquare:
      return "square";
    case Shape::kTriangle:
      return "triangle";
  }
  return "?";
}

Shape shape_from_name(const std::string& name) {
  if (name == "circle") return Shape::kCircle;
  if (name == "square") return Shape::kSquare;
  if (name == "triangle") return Shape::kTriangle;
  throw InputError("unknown sprite shape '" + name + "'");
}

std::array<double, 3> palette_color(int index) {
  if (index < 0 || index >= kNumColors) throw InputError("palette index out of range");
  const auto& p = kPalette[index];
  return {p[0] / 255.0, p[1] / 255.0, p[2] / 255.0};
}

int palette_index(const std::array<double, 3>& rgb) {
  for (int i = 0; i < kNumColors; ++i) {
    if (palette_color(i) == rgb) return i;
  }
  return -1;
}

void SynthConfig::validate() const {
  if (frame_size < 32) throw ConfigError("frame_size must be >= 32");
  if (n_frames < 3) throw ConfigError("n_frames must be >= 3");
  if (min_sprites < 1 || max_sprites > 8 || min_sprites > max_sprites)
    throw ConfigError("n_sprites_range must lie within [1, 8]");
  if (!(min_speed >= 0.0) || !(max_speed >= min_speed) || max_speed > frame_size / 4.0)
    throw ConfigError("velocity_range must satisfy 0 <= min <= max <= frame_size/4");
  if (min_radius < 2 || max_radius > frame_size / 4 || min_radius > max_radius)
    throw ConfigError("radius_range must lie within [2, frame_size/4]");
}

SpriteSpec step_sprite(SpriteSpec s, int frame_size) {
  const double lo = s.radius;
  const double hi = frame_size - 1 - s.radius;
  for (int a = 0; a < 2; ++a) {
    double p = s.pos[a] + s.vel[a];
    if (p < lo) {
      p = 2.0 * lo - p;
      s.vel[a] = -s.vel[a];
    } else if (p > hi) {
      p = 2.0 * hi - p;
      s.vel[a] = -s.vel[a];
    }
    s.pos[a] = std::clamp(p, lo, hi);
  }
  return s;
}

Image render_frame(const std::vector<SpriteSpec>& sprites, int frame_size) {
  const int n = frame_size;
  Image img(n, n, level_to_float(kBackgroundLevel));
  const int floor_top = n - n / 8;
  const float floor_v = level_to_float(kFloorLevel);
  for (int y = floor_top; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = floor_v;
  const float post_v = level_to_float(kPostLevel);
  const int post_x0 = n / 8;
  const int post_w = std::max(2, n / 32);
  for (int y = floor_top - n / 4; y < floor_top; ++y)
    for (int x = post_x0; x < post_x0 + post_w; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = post_v;

  for (const SpriteSpec& s : sprites) {
    const int cx = round_half_up(s.pos[0]);
    const int cy = round_half_up(s.pos[1]);
    const std::array<float, 3> col{static_cast<float>(s.color[0]), static_cast<float>(s.color[1]),
                                   static_cast<float>(s.color[2])};
    const int y0 = std::max(0, cy - s.radius), y1 = std::min(n - 1, cy + s.radius);
    const int x0 = std::max(0, cx - s.radius), x1 = std::min(n - 1, cx + s.radius);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (covers(s, cx, cy, x, y))
          for (int c = 0; c < 3; ++c) img.at(x, y, c) = col[c];
  }
  return img;
}

ClipFrames generate_clip(std::uint64_t seed, const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(seed);
  const int count = static_cast<int>(rng.uniform_int(cfg.min_sprites, cfg.max_sprites));
  std::vector<SpriteSpec> sprites(count);
  for (auto& s : sprites) {
    s.shape = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
    s.color = palette_color(static_cast<int>(rng.uniform_int(0, kNumColors - 1)));
    s.radius = static_cast<int>(rng.uniform_int(cfg.min_radius, cfg.max_radius));
    for (int a = 0; a < 2; ++a) {
      s.pos[a] = rng.uniform(s.radius, cfg.frame_size - 1 - s.radius);
      const double speed = rng.uniform(cfg.min_speed, cfg.max_speed);
      s.vel[a] = rng.bernoulli(0.5) ? speed : -speed;
    }
  }

  ClipFrames clip;
  clip.seed = seed;
  clip.cfg = cfg;
  clip.frames.reserve(cfg.n_frames);
  clip.metadata.reserve(cfg.n_frames);
  for (int t = 0; t < cfg.n_frames; ++t) {
    if (t > 0)
      for (auto& s : sprites) s = step_sprite(s, cfg.frame_size);
    clip.metadata.push_back(sprites);
    clip.frames.push_back(render_frame(sprites, cfg.frame_size));
  }
  return clip;
}

std::vector<ClipFrames> generate_clips(std::uint64_t seed, int count, const SynthConfig& cfg) {
  if (count < 0) throw ConfigError("clip count must be non-negative");
  std::vector<ClipFrames> clips;
  clips.reserve(count);
  for (int i = 0; i < count; ++i)
    clips.push_back(generate_clip(derive_seed(seed, "clip", {static_cast<std::uint64_t>(i)}), cfg));
  return clips;
}

std::string metadata_json(const ClipFrames& clip) {
  json frames = json::array();
  for (const auto& sprites : clip.metadata) {
    json row = json::array();
    for (const auto& s : sprites) {
      row.push_back({{"shape", shape_name(s.shape)},
                     {"color", s.color},
                     {"radius", s.radius},
                     {"pos", s.pos},
                     {"vel", s.vel}});
    }
    frames.push_back(std::move(row));
  }
  json j{{"seed", clip.seed},
         {"cfg", cfg_to_json(clip.cfg)},
         {"fps_equivalent", clip.fps_equivalent},
         {"frames", std::move(frames)}};
  return j.dump(1);
}

DatasetManifest write_dataset(const std::vector<ClipFrames>& clips, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("dataset write error (" + ec.message() + ")", dir.string());

  DatasetManifest manifest{dir, {}};
  json entries = json::array();
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const ClipFrames& clip = clips[i];
    const std::string name = clip_name(i);
    const fs::path cdir = dir / name;
    fs::create_directories(cdir, ec);
    if (ec) throw IoError("dataset write error (" + ec.message() + ")", cdir.string());
    for (int t = 0; t < clip.size(); ++t) write_png(clip.frames[t], cdir / frame_name(t));
    write_file_atomic(cdir / "metadata.json", metadata_json(clip));
    manifest.clips.push_back({name, name, clip.size(), clip.seed});
    entries.push_back({{"id", name}, {"dir", name}, {"n_frames", clip.size()}, {"seed", clip.seed}});
  }
  write_file_atomic(dir / "manifest.json", json{{"clips", entries}, {"count", clips.size()}}.dump(1));
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  if (!std::filesystem::exists(path)) throw IoError("dataset manifest missing", path.string());
  DatasetManifest m{dir, {}};
  try {
    const json j = json::parse(read_file(path));
    for (const auto& e : j.at("clips")) {
      m.clips.push_back({e.at("id").get<std::string>(), e.at("dir").get<std::string>(),
                         e.at("n_frames").get<int>(), e.at("seed").get<std::uint64_t>()});
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed manifest (") + e.what() + ")", path.string());
  }
  return m;
}

ClipFrames read_clip(const std::filesystem::path& clip_dir) {
  const auto meta_path = clip_dir / "metadata.json";
  ClipFrames clip;
  try {
    const json j = json::parse(read_file(meta_path));
    clip.seed = j.at("seed").get<std::uint64_t>();
    clip.cfg = cfg_from_json(j.at("cfg"));
    clip.fps_equivalent = j.value("fps_equivalent", 10);
    for (const auto& row : j.at("frames")) {
      std::vector<SpriteSpec> sprites;
      for (const auto& e : row) {
        SpriteSpec s;
        s.shape = shape_from_name(e.at("shape").get<std::string>());
        s.color = e.at("color").get<std::array<double, 3>>();
        s.radius = e.at("radius").get<int>();
        s.pos = e.at("pos").get<std::array<double, 2>>();
        s.vel = e.at("vel").get<std::array<double, 2>>();
        sprites.push_back(s);
      }
      clip.metadata.push_back(std::move(sprites));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed metadata (") + e.what() + ")", meta_path.string());
  }
  for (std::size_t t = 0; t < clip.metadata.size(); ++t)
    clip.frames.push_back(read_png(clip_dir / frame_name(static_cast<int>(t))));
  return clip;
}

std::vector<ClipFrames> read_dataset(const std::filesystem::path& dir) {
  const DatasetManifest m = read_manifest(dir);
  std::vector<ClipFrames> clips;
  clips.reserve(m.clips.size());
  for (const auto& e : m.clips) clips.push_back(read_clip(dir / e.dir));
  return clips;
}

}  // namespace crobo::synth
