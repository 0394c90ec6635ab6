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

#ifndef CROBO_RANDOM_HPP
#define CROBO_RANDOM_HPP

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace crobo {

// Seed derivation: a stable hash of (parent seed, purpose, indices...).
// Adding a new purpose string never perturbs the streams of existing ones.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view purpose,
                          std::initializer_list<std::uint64_t> indices = {});

/// Seeded random stream.
///
/// Wraps std::mt19937_64, whose output sequence is fixed by the standard.
/// The distributions below are written out by hand because the
/// std:: distributions are implementation-defined, and every stream in this
/// project must be reproducible bit-exactly on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] (inclusive), unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via the Marsaglia polar method.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Normal(0, stddev) rejected outside [-2 stddev, 2 stddev].
  double truncated_normal(double stddev);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace crobo

#endif  // CROBO_RANDOM_HPP
