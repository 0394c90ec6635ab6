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

#include "crobo/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "crobo/errors.hpp"

namespace crobo::train {

void ScheduleConfig::validate() const {
  if (total_steps <= 0) throw ConfigError("total_steps must be positive");
  if (warmup_steps < 0 || warmup_steps >= total_steps)
    throw ConfigError("warmup_steps must lie in [0, total_steps)");
  if (!(base_lr >= 0.0) || !(min_lr >= 0.0)) throw ConfigError("learning rates must be non-negative");
}

double lr_at(std::int64_t step, const ScheduleConfig& s) {
  if (step < 0 || step > s.total_steps)
    throw InputError("lr_at: step " + std::to_string(step) + " outside [0, " +
                     std::to_string(s.total_steps) + "]");
  if (step < s.warmup_steps) return s.base_lr * static_cast<double>(step) / s.warmup_steps;
  const double progress =
      static_cast<double>(step - s.warmup_steps) / static_cast<double>(s.total_steps - s.warmup_steps);
  return s.min_lr + (s.base_lr - s.min_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

namespace {

template <typename T>
void adamw_update_impl(std::span<T> params, std::span<const T> grads,
                  const std::vector<char>& decay_mask, AdamWState<T>& state, double lr,
                  const AdamWConfig& cfg) {
  const std::size_t n = params.size();
  if (grads.size() != n || decay_mask.size() != n || state.m.size() != n || state.v.size() != n)
    throw InputError("adamw_update: buffer sizes differ");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(grads[i]))
      throw NumericError("adamw_update: non-finite gradient at flat index " + std::to_string(i));

  state.step += 1;
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T bc1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(state.step)));
  const T bc2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(state.step)));
  const T step_lr = static_cast<T>(lr);
  const T decay = static_cast<T>(lr * cfg.weight_decay);
  const T eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < n; ++i) {
    const T g = grads[i];
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
    const T m_hat = state.m[i] / bc1;
    const T v_hat = state.v[i] / bc2;
    const T old = params[i];
    params[i] = old - step_lr * (m_hat / (std::sqrt(v_hat) + eps));
    if (decay_mask[i]) params[i] -= decay * old;
  }
}

template <typename T>
double clip_grad_norm_impl(std::span<T> grads, double max_norm) {
  double sq = 0.0;
  for (T g : grads) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T s = static_cast<T>(max_norm / (norm + 1e-12));
    for (T& g : grads) g *= s;
  }
  return norm;
}

}  // namespace

void adamw_update(std::span<float> params, std::span<const float> grads,
                  const std::vector<char>& decay_mask, AdamWState<float>& state, double lr,
                  const AdamWConfig& cfg) {
  adamw_update_impl(params, grads, decay_mask, state, lr, cfg);
}
void adamw_update(std::span<double> params, std::span<const double> grads,
                  const std::vector<char>& decay_mask, AdamWState<double>& state, double lr,
                  const AdamWConfig& cfg) {
  adamw_update_impl(params, grads, decay_mask, state, lr, cfg);
}
double clip_grad_norm(std::span<float> grads, double max_norm) { return clip_grad_norm_impl(grads, max_norm); }
double clip_grad_norm(std::span<double> grads, double max_norm) { return clip_grad_norm_impl(grads, max_norm); }

}  // namespace crobo::train
