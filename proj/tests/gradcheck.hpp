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

#ifndef CROBO_TESTS_GRADCHECK_HPP
#define CROBO_TESTS_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "crobo/model.hpp"
#include "crobo/random.hpp"
#include "crobo/views.hpp"

namespace crobo::testing {

// enc dim 8 / depth 1, dec dim 8 / depth 1, 2x2 grid of 2x2 patches.
inline nn::ModelConfig micro_config() {
  nn::ModelConfig c;
  c.enc_dim = 8;
  c.enc_depth = 1;
  c.enc_heads = 2;
  c.dec_dim = 8;
  c.dec_depth = 1;
  c.dec_heads = 2;
  c.patch_size = 2;
  c.grid_side = 2;
  c.seed = 3;
  return c;
}

// Parameters pushed away from the tiny init scale so every gradient is
// well above finite-difference noise.
inline nn::ParamSet<double> perturbed_params(const nn::Model<double>& model, std::uint64_t seed) {
  nn::ParamSet<double> p = model.init_params();
  Rng rng(seed);
  for (double& v : p.flat()) v += rng.normal(0.0, 0.4);
  return p;
}

inline nn::Example<double> random_example(const nn::ModelConfig& cfg, const std::vector<int>& masked,
                                          std::uint64_t seed) {
  Rng rng(seed);
  const int n = cfg.num_patches(), pd = cfg.patch_dim();
  nn::Example<double> ex;
  ex.source.resize(n, pd);
  ex.target.resize(n, pd);
  ex.targets.resize(n, pd);
  for (Eigen::Index i = 0; i < ex.source.size(); ++i) {
    ex.source.data()[i] = rng.uniform();
    ex.target.data()[i] = rng.uniform();
    ex.targets.data()[i] = rng.normal();
  }
  ex.mask = views::make_mask(n, masked, static_cast<double>(masked.size()) / n);
  return ex;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst_tensor;
  std::set<std::string> tensors;
};

// Central differences against the analytic gradient, every `stride`-th
// parameter plus the first entry of every tensor. The relative error uses
// max(|numeric|, |analytic|, floor) as denominator, where the floor is the
// larger of 1e-6 and the round-off level of the difference quotient. Without
// it, entries whose exact gradient is zero (the key bias) would be scored on
// pure rounding noise.
inline GradCheckResult run_gradcheck(const nn::Model<double>& model, nn::ParamSet<double> p,
                                     const nn::Example<double>& ex, double h, std::size_t stride = 1) {
  const nn::LossGrad<double> lg = model.loss_and_grad(p, ex);
  GradCheckResult r;
  const double floor = std::max(1e-6, 1e4 * std::numeric_limits<double>::epsilon() *
                                          std::max(1.0, std::abs(lg.loss)) / h);
  const auto& tensors = model.layout().tensors();
  for (const auto& t : tensors) {
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (k != 0 && (t.offset + k) % stride != 0) continue;
      const std::size_t i = t.offset + k;
      const double orig = p.flat()[i];
      p.flat()[i] = orig + h;
      const double lp = model.loss_and_grad(p, ex).loss;
      p.flat()[i] = orig - h;
      const double lm = model.loss_and_grad(p, ex).loss;
      p.flat()[i] = orig;
      const double numeric = (lp - lm) / (2.0 * h);
      const double analytic = lg.grads.flat()[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), floor});
      const double rel = std::abs(numeric - analytic) / denom;
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst_tensor = t.name;
      }
      ++r.checked;
      r.tensors.insert(t.name);
    }
  }
  return r;
}

}  // namespace crobo::testing

#endif  // CROBO_TESTS_GRADCHECK_HPP
