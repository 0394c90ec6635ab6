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

#include <benchmark/benchmark.h>

#include "crobo/model.hpp"
#include "crobo/random.hpp"
#include "crobo/synthvideo.hpp"
#include "crobo/views.hpp"

namespace {

using namespace crobo;

nn::Example<float> default_example(std::uint64_t seed) {
  synth::SynthConfig sc;
  const synth::ClipFrames clip = synth::generate_clip(seed, sc);
  const views::ViewConfig vc;
  Rng rng(seed);
  const views::ViewPair pair = views::make_view_pair(clip, 0, vc.variant, rng, vc);
  return nn::make_example(pair, views::sample_mask(vc.num_patches(), vc.mask_ratio, rng), vc.patch_size);
}

void BM_LossAndGrad(benchmark::State& state) {
  const nn::Model<float> model(nn::ModelConfig{});
  const auto params = model.init_params();
  const auto ex = default_example(1);
  for (auto _ : state) benchmark::DoNotOptimize(model.loss_and_grad(params, ex).loss);
}
BENCHMARK(BM_LossAndGrad)->Unit(benchmark::kMillisecond);

void BM_EncodeFull(benchmark::State& state) {
  const nn::Model<float> model(nn::ModelConfig{});
  const auto params = model.init_params();
  const auto ex = default_example(2);
  for (auto _ : state) benchmark::DoNotOptimize(model.encode_full(params, ex.source).cls);
}
BENCHMARK(BM_EncodeFull)->Unit(benchmark::kMicrosecond);

void BM_ViewPair(benchmark::State& state) {
  synth::SynthConfig sc;
  const synth::ClipFrames clip = synth::generate_clip(3, sc);
  const views::ViewConfig vc;
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(views::make_view_pair(clip, 0, vc.variant, rng, vc));
}
BENCHMARK(BM_ViewPair)->Unit(benchmark::kMicrosecond);

void BM_RenderFrame(benchmark::State& state) {
  synth::SynthConfig sc;
  const synth::ClipFrames clip = synth::generate_clip(4, sc);
  for (auto _ : state) benchmark::DoNotOptimize(synth::render_frame(clip.metadata[0], sc.frame_size));
}
BENCHMARK(BM_RenderFrame)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
