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

#include "crobo/params.hpp"

#include "crobo/errors.hpp"

namespace crobo::nn {

int ParamLayout::add(std::string name, int rows, int cols, Init init, bool decay) {
  if (rows <= 0 || cols <= 0) throw ConfigError("tensor '" + name + "' has an empty shape");
  if (find(name) >= 0) throw ConfigError("duplicate tensor name '" + name + "'");
  TensorInfo t{std::move(name), rows, cols, total_, init, decay};
  total_ += t.size();
  tensors_.push_back(std::move(t));
  return static_cast<int>(tensors_.size()) - 1;
}

int ParamLayout::find(const std::string& name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].name == name) return static_cast<int>(i);
  return -1;
}

std::vector<char> ParamLayout::decay_mask() const {
  std::vector<char> mask(total_, 0);
  for (const auto& t : tensors_)
    if (t.decay) std::fill(mask.begin() + t.offset, mask.begin() + t.offset + t.size(), 1);
  return mask;
}

}  // namespace crobo::nn
