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

#ifndef CROBO_OPTIMIZER_HPP
#define CROBO_OPTIMIZER_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace crobo::train {

struct ScheduleConfig {
  double base_lr = 1.5e-4;
  std::int64_t warmup_steps = 0;
  std::int64_t total_steps = 1;
  double min_lr = 0.0;

  void validate() const;  // throws ConfigError
};

/// Linear warmup from 0 to base_lr, then half-cosine decay to min_lr at
/// total_steps. Throws InputError for steps outside [0, total_steps].
double lr_at(std::int64_t step, const ScheduleConfig& sched);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

template <typename T>
struct AdamWState {
  std::vector<T> m;
  std::vector<T> v;
  std::int64_t step = 0;

  explicit AdamWState(std::size_t n = 0) : m(n, T(0)), v(n, T(0)) {}
};

/// One decoupled-weight-decay Adam step over flat buffers:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta
/// Decay only touches entries whose decay_mask is set. Throws NumericError
/// on non-finite gradients before modifying anything.
void adamw_update(std::span<float> params, std::span<const float> grads,
                  const std::vector<char>& decay_mask, AdamWState<float>& state, double lr,
                  const AdamWConfig& cfg);
void adamw_update(std::span<double> params, std::span<const double> grads,
                  const std::vector<char>& decay_mask, AdamWState<double>& state, double lr,
                  const AdamWConfig& cfg);

// Scales grads in place so their global L2 norm is at most max_norm;
// returns the norm before clipping.
double clip_grad_norm(std::span<float> grads, double max_norm);
double clip_grad_norm(std::span<double> grads, double max_norm);

}  // namespace crobo::train

#endif  // CROBO_OPTIMIZER_HPP
