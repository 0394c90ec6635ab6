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

#include "crobo/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>

#include "crobo/errors.hpp"

namespace crobo {
namespace {

constexpr double kCubicA = -0.5;

double cubic_weight(double x) {
  x = std::abs(x);
  if (x <= 1.0) return ((kCubicA + 2.0) * x - (kCubicA + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((kCubicA * x - 5.0 * kCubicA) * x + 8.0 * kCubicA) * x - 4.0 * kCubicA;
  return 0.0;
}

struct Taps {
  std::array<int, 4> index;
  std::array<double, 4> weight;
};

// Taps for each output coordinate along one axis, half-pixel-centre aligned.
std::vector<Taps> axis_taps(int start, int extent, int out) {
  std::vector<Taps> taps(out);
  const double scale = static_cast<double>(extent) / out;
  for (int o = 0; o < out; ++o) {
    const double src = (o + 0.5) * scale - 0.5;
    const double base = std::floor(src);
    const double t = src - base;
    for (int k = 0; k < 4; ++k) {
      const int rel = static_cast<int>(base) - 1 + k;
      taps[o].index[k] = start + std::clamp(rel, 0, extent - 1);
      taps[o].weight[k] = cubic_weight(t - (k - 1));
    }
  }
  return taps;
}

std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

Image resize_bicubic(const Image& src, const Box& box, int out_w, int out_h) {
  if (box.w <= 0 || box.h <= 0 || box.x0 < 0 || box.y0 < 0 || box.x0 + box.w > src.width ||
      box.y0 + box.h > src.height) {
    throw InputError("resize_bicubic: box outside source image");
  }
  if (out_w <= 0 || out_h <= 0) throw InputError("resize_bicubic: empty output");
  const auto xt = axis_taps(box.x0, box.w, out_w);
  const auto yt = axis_taps(box.y0, box.h, out_h);

  // Separable: horizontal pass over the rows the vertical taps touch.
  std::vector<double> rows(static_cast<std::size_t>(src.height) * out_w * 3, 0.0);
  for (int y = box.y0; y < box.y0 + box.h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += xt[x].weight[k] * src.at(xt[x].index[k], y, c);
        rows[(static_cast<std::size_t>(y) * out_w + x) * 3 + c] = acc;
      }
    }
  }
  Image out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) {
          acc += yt[y].weight[k] * rows[(static_cast<std::size_t>(yt[y].index[k]) * out_w + x) * 3 + c];
        }
        out.at(x, y, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Image flip_horizontal(const Image& src) {
  Image out(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(src.width - 1 - x, y, c) = src.at(x, y, c);
  return out;
}

Image quantize8(const Image& img) {
  Image out = img;
  for (float& v : out.data) v = level_to_float(to_byte(v));
  return out;
}

void write_png(const Image& img, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(img.data.size());
  std::transform(img.data.begin(), img.data.end(), bytes.begin(), to_byte);
  png_image meta;
  std::memset(&meta, 0, sizeof(meta));
  meta.version = PNG_IMAGE_VERSION;
  meta.width = static_cast<png_uint_32>(img.width);
  meta.height = static_cast<png_uint_32>(img.height);
  meta.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&meta, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    std::string why = meta.message;
    png_image_free(&meta);
    throw IoError("png write failed (" + why + ")", path.string());
  }
}

Image read_png(const std::filesystem::path& path) {
  png_image meta;
  std::memset(&meta, 0, sizeof(meta));
  meta.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&meta, path.c_str())) {
    throw IoError("png open failed", path.string());
  }
  meta.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(meta));
  if (!png_image_finish_read(&meta, nullptr, bytes.data(), 0, nullptr)) {
    std::string why = meta.message;
    png_image_free(&meta);
    throw IoError("png decode failed (" + why + ")", path.string());
  }
  Image img(static_cast<int>(meta.width), static_cast<int>(meta.height));
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = level_to_float(bytes[i]);
  return img;
}

}  // namespace crobo
