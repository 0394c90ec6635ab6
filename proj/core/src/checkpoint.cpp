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

#include "crobo/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "crobo/errors.hpp"
#include "crobo/hashing.hpp"
#include "json_io.hpp"

namespace crobo {

json model_config_to_json(const nn::ModelConfig& c) {
  return {{"enc_dim", c.enc_dim},     {"enc_depth", c.enc_depth}, {"enc_heads", c.enc_heads},
          {"dec_dim", c.dec_dim},     {"dec_depth", c.dec_depth}, {"dec_heads", c.dec_heads},
          {"mlp_ratio", c.mlp_ratio}, {"patch_size", c.patch_size}, {"grid_side", c.grid_side},
          {"seed", c.seed}};
}

nn::ModelConfig model_config_from_json(const json& j, nn::ModelConfig c) {
  read_opt(j, "enc_dim", c.enc_dim);
  read_opt(j, "enc_depth", c.enc_depth);
  read_opt(j, "enc_heads", c.enc_heads);
  read_opt(j, "dec_dim", c.dec_dim);
  read_opt(j, "dec_depth", c.dec_depth);
  read_opt(j, "dec_heads", c.dec_heads);
  read_opt(j, "mlp_ratio", c.mlp_ratio);
  read_opt(j, "patch_size", c.patch_size);
  read_opt(j, "grid_side", c.grid_side);
  read_opt(j, "seed", c.seed);
  return c;
}

json view_config_to_json(const views::ViewConfig& c) {
  return {{"view_size", c.view_size},       {"patch_size", c.patch_size},
          {"global_scale", c.global_scale}, {"local_scale", c.local_scale},
          {"aspect", c.aspect},             {"mask_ratio", c.mask_ratio},
          {"variant", views::variant_name(c.variant)},
          {"time_gap", c.time_gap},         {"flip_prob", c.flip_prob}};
}

views::ViewConfig view_config_from_json(const json& j, views::ViewConfig c) {
  read_opt(j, "view_size", c.view_size);
  read_opt(j, "patch_size", c.patch_size);
  read_opt(j, "global_scale", c.global_scale);
  read_opt(j, "local_scale", c.local_scale);
  read_opt(j, "aspect", c.aspect);
  read_opt(j, "mask_ratio", c.mask_ratio);
  if (j.contains("variant")) c.variant = views::variant_from_name(j.at("variant").get<std::string>());
  read_opt(j, "time_gap", c.time_gap);
  read_opt(j, "flip_prob", c.flip_prob);
  return c;
}

namespace ckpt {
namespace {

void append_le(std::string& out, const float* data, std::size_t n) {
  const std::size_t base = out.size();
  out.resize(base + 4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(data[i]);
    for (int b = 0; b < 4; ++b) out[base + 4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
}

void read_le(const std::string& bytes, std::size_t offset, float* out, std::size_t n,
             const std::filesystem::path& path) {
  if (offset + 4 * n > bytes.size()) throw IoError("checkpoint blob truncated", path.string());
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 4 * i + b])) << (8 * b);
    out[i] = std::bit_cast<float>(bits);
  }
}

json shape_of(const nn::TensorInfo& t) {
  return t.rows == 1 ? json::array({t.cols}) : json::array({t.rows, t.cols});
}

}  // namespace

void write_checkpoint(const std::filesystem::path& dir, const nn::ModelConfig& model,
                      const nn::ParamSet<float>& params, std::int64_t step,
                      const train::AdamWState<float>* optimizer, const std::string& run_config_json) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory", dir.string());

  std::string blob;
  json tensors = json::array();
  for (const auto& t : params.layout().tensors()) {
    tensors.push_back({{"name", t.name},
                       {"shape", shape_of(t)},
                       {"dtype", "float32"},
                       {"offset", 4 * t.offset},
                       {"nbytes", 4 * t.size()}});
  }
  append_le(blob, params.flat().data(), params.flat().size());

  json manifest{{"format", "crobo-checkpoint"},
                {"version", 1},
                {"step", step},
                {"config", model_config_to_json(model)},
                {"params_file", "params.bin"},
                {"byte_order", "little"},
                {"tensors", tensors}};
  if (optimizer) {
    const std::size_t n = optimizer->m.size();
    std::string opt_blob;
    append_le(opt_blob, optimizer->m.data(), n);
    append_le(opt_blob, optimizer->v.data(), n);
    manifest["optimizer"] = {
        {"file", "optimizer.bin"},
        {"step", optimizer->step},
        {"tensors",
         {{{"name", "exp_avg"}, {"dtype", "float32"}, {"offset", 0}, {"nbytes", 4 * n}},
          {{"name", "exp_avg_sq"}, {"dtype", "float32"}, {"offset", 4 * n}, {"nbytes", 4 * n}}}}};
    write_file_atomic(dir / "optimizer.bin", opt_blob);
  }
  if (!run_config_json.empty()) manifest["run_config"] = json::parse(run_config_json);
  write_file_atomic(dir / "params.bin", blob);
  write_file_atomic(dir / "manifest.json", manifest.dump(1));
}

Checkpoint read_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path))
    throw IoError("checkpoint manifest missing", manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed checkpoint manifest (") + e.what() + ")",
                  manifest_path.string());
  }
  Checkpoint ck;
  ck.model = model_config_from_json(manifest.at("config"));
  ck.step = manifest.at("step").get<std::int64_t>();
  const nn::Model<float> model(ck.model);
  ck.params = nn::ParamSet<float>(model.layout_ptr());

  const auto params_path = dir / manifest.value("params_file", std::string("params.bin"));
  const std::string blob = read_file(params_path);
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != model.layout().tensors().size())
    throw IoError("checkpoint tensor list does not match its model config", manifest_path.string());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& info = model.layout()[static_cast<int>(i)];
    const auto& entry = tensors[i];
    if (entry.at("name").get<std::string>() != info.name ||
        entry.at("nbytes").get<std::size_t>() != 4 * info.size())
      throw IoError("checkpoint tensor '" + info.name + "' does not match", manifest_path.string());
    read_le(blob, entry.at("offset").get<std::size_t>(), ck.params.flat().data() + info.offset,
            info.size(), params_path);
  }
  if (manifest.contains("optimizer")) {
    const auto& o = manifest.at("optimizer");
    const auto opt_path = dir / o.at("file").get<std::string>();
    const std::string ob = read_file(opt_path);
    train::AdamWState<float> state(ck.params.flat().size());
    state.step = o.at("step").get<std::int64_t>();
    const auto& ot = o.at("tensors");
    read_le(ob, ot.at(0).at("offset").get<std::size_t>(), state.m.data(), state.m.size(), opt_path);
    read_le(ob, ot.at(1).at("offset").get<std::size_t>(), state.v.data(), state.v.size(), opt_path);
    ck.optimizer = std::move(state);
  }
  if (manifest.contains("run_config")) ck.run_config_json = manifest.at("run_config").dump();
  return ck;
}

std::string checkpoint_hash(const std::filesystem::path& dir) { return sha256_file(dir / "params.bin"); }

}  // namespace ckpt
}  // namespace crobo
