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

#ifndef CROBO_SRC_JSON_IO_HPP
#define CROBO_SRC_JSON_IO_HPP

// JSON mappings shared by the library sources. Not installed.

#include "crobo/model.hpp"
#include "crobo/views.hpp"
#include "json.hpp"

namespace crobo {

using nlohmann::json;

// Reads j[key] into out when present; a type mismatch is a ConfigError.
template <typename V>
void read_opt(const json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

json model_config_to_json(const nn::ModelConfig& c);
nn::ModelConfig model_config_from_json(const json& j, nn::ModelConfig base = {});

json view_config_to_json(const views::ViewConfig& c);
views::ViewConfig view_config_from_json(const json& j, views::ViewConfig base = {});

}  // namespace crobo

#endif  // CROBO_SRC_JSON_IO_HPP
