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

#ifndef CROBO_CHECKPOINT_HPP
#define CROBO_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "crobo/model.hpp"
#include "crobo/optimizer.hpp"

namespace crobo::ckpt {

/// On disk: <dir>/manifest.json (model config, tensor names, shapes,
/// dtypes, byte offsets, training step) and <dir>/params.bin (little-endian
/// float32 tensors concatenated in manifest order). Training checkpoints add
/// <dir>/optimizer.bin with the AdamW moments in the same encoding.
struct Checkpoint {
  nn::ModelConfig model;
  std::int64_t step = 0;
  nn::ParamSet<float> params;
  std::optional<train::AdamWState<float>> optimizer;
  std::string run_config_json;  // empty when absent
};

void write_checkpoint(const std::filesystem::path& dir, const nn::ModelConfig& model,
                      const nn::ParamSet<float>& params, std::int64_t step,
                      const train::AdamWState<float>* optimizer = nullptr,
                      const std::string& run_config_json = {});

Checkpoint read_checkpoint(const std::filesystem::path& dir);

// SHA-256 of params.bin.
std::string checkpoint_hash(const std::filesystem::path& dir);

}  // namespace crobo::ckpt

#endif  // CROBO_CHECKPOINT_HPP
