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

#ifndef CROBO_IMAGE_HPP
#define CROBO_IMAGE_HPP

#include <cstddef>
#include <filesystem>
#include <vector>

namespace crobo {

/// Interleaved RGB image, row-major, nominal values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // height * width * 3

  Image() = default;
  Image(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

  float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  bool operator==(const Image&) const = default;
};

// Axis-aligned integer box within a parent image.
struct Box {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;
};

/// Resample `box` of `src` to an out_w x out_h image with the Catmull-Rom
/// cubic kernel (a = -0.5). Taps are clamped to the box, so every output
/// pixel depends only on pixels inside it.
Image resize_bicubic(const Image& src, const Box& box, int out_w, int out_h);

Image flip_horizontal(const Image& src);

// 8-bit PNG IO. Writing clamps to [0, 1] and rounds to the nearest level;
// reading maps level n to n / 255.
void write_png(const Image& img, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

// The float an 8-bit level maps to. Shared by PNG reading and sprite colours
// so that rendered frames survive a PNG round trip bit-exactly.
inline float level_to_float(int level) { return static_cast<float>(level / 255.0); }

// Values quantized the way write_png would store them.
Image quantize8(const Image& img);

}  // namespace crobo

#endif  // CROBO_IMAGE_HPP
