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

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "crobo/errors.hpp"
#include "crobo/model.hpp"
#include "crobo/synthvideo.hpp"
#include "gradcheck.hpp"

namespace crobo::nn {
namespace {

using testing::micro_config;
using testing::perturbed_params;
using testing::random_example;

ModelConfig small_config() {
  ModelConfig c;
  c.enc_dim = 16;
  c.enc_depth = 2;
  c.enc_heads = 2;
  c.dec_dim = 16;
  c.dec_depth = 1;
  c.dec_heads = 2;
  c.patch_size = 4;
  c.grid_side = 4;
  return c;
}

TEST(ModelInit, Deterministic) {
  const Model<float> m(ModelConfig{});
  EXPECT_TRUE(m.init_params() == m.init_params());
  ModelConfig other;
  other.seed = 1;
  EXPECT_FALSE(m.init_params() == Model<float>(other).init_params());
}

TEST(ModelInit, LayerNormScalesAreOneAndBiasesZero) {
  const Model<float> m(ModelConfig{});
  const ParamSet<float> p = m.init_params();
  int norms = 0;
  for (std::size_t i = 0; i < m.layout().tensors().size(); ++i) {
    const auto& t = m.layout().tensors()[i];
    const auto v = p.mat(i);
    const bool is_norm = t.name.find("norm") != std::string::npos;
    if (is_norm && t.name.ends_with(".weight")) {
      ++norms;
      EXPECT_TRUE((v.array() == 1.0f).all()) << t.name;
    }
    if (t.name.ends_with(".bias")) EXPECT_TRUE((v.array() == 0.0f).all()) << t.name;
    if (t.name.ends_with(".weight") && !is_norm) {
      EXPECT_LE(v.cwiseAbs().maxCoeff(), 0.04f) << t.name;
      EXPECT_GT(v.cwiseAbs().maxCoeff(), 0.0f) << t.name;
    }
  }
  // 2 per encoder block, 2 per decoder block, two final norms.
  EXPECT_EQ(norms, 2 * 3 + 2 * 2 + 2);
}

TEST(ModelInit, DefaultParameterCountMatchesHandCount) {
  // Per-tensor sums worked out by hand for enc 64x3, dec 48x2, P=8, grid 8.
  const std::size_t patch_proj = 192 * 64 + 64;
  const std::size_t enc_block = 2 * 64 + (64 * 192 + 192) + (64 * 64 + 64) + 2 * 64 + (64 * 256 + 256) +
                                (256 * 64 + 64);
  const std::size_t dec_block = 2 * 48 + (48 * 144 + 144) + (48 * 48 + 48) + 2 * 48 + (48 * 192 + 192) +
                                (192 * 48 + 48);
  const std::size_t expected = patch_proj + 64 + 64 + 3 * enc_block + 2 * 64 + (64 * 48 + 48) + 48 +
                               2 * dec_block + 2 * 48 + (48 * 192 + 192);
  EXPECT_EQ(expected, 231776u);
  EXPECT_EQ(Model<float>(ModelConfig{}).layout().total(), expected);
  EXPECT_EQ(parameter_count(ModelConfig{}), expected);
}

TEST(ModelConfig, InconsistentDimsThrow) {
  ModelConfig c;
  c.enc_heads = 5;
  EXPECT_THROW(Model<float>{c}, ConfigError);
  c = {};
  c.dec_dim = 50;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(SinCos, TableValues) {
  const Mat<double> t = sincos_2d_table(8, 2);
  ASSERT_EQ(t.rows(), 4);
  ASSERT_EQ(t.cols(), 8);
  // Cell (row 0, col 0): sin(0) = 0, cos(0) = 1 in both halves.
  EXPECT_EQ(t(0, 0), 0.0);
  EXPECT_EQ(t(0, 2), 1.0);
  // Cell (row 0, col 1), lowest frequency omega = 1.
  EXPECT_DOUBLE_EQ(t(1, 0), std::sin(1.0));
  EXPECT_DOUBLE_EQ(t(1, 2), std::cos(1.0));
  EXPECT_DOUBLE_EQ(t(2, 4), std::sin(1.0));
}

TEST(Encode, ShapeContractForVisibleSubset) {
  const ModelConfig cfg;
  const Model<float> m(cfg);
  const auto p = m.init_params();
  Rng rng(1);
  Mat<float> patches = Mat<float>::Random(6, cfg.patch_dim());
  const std::vector<int> idx{3, 9, 10, 20, 41, 63};
  const auto out = m.encode(p, patches, idx);
  EXPECT_EQ(out.cls.size(), cfg.enc_dim);
  EXPECT_EQ(out.tokens.rows(), 6);
  EXPECT_EQ(out.indices, idx);
  const auto full = m.encode_full(p, Mat<float>::Random(64, cfg.patch_dim()));
  EXPECT_EQ(full.tokens.rows(), 64);
}

TEST(Encode, PermutationOfVisibleListIsInvariant) {
  const ModelConfig cfg = small_config();
  const Model<double> m(cfg);
  const auto p = perturbed_params(m, 2);
  Rng rng(3);
  std::vector<int> idx{0, 2, 5, 7, 11, 14};
  Mat<double> patches(idx.size(), cfg.patch_dim());
  for (Eigen::Index i = 0; i < patches.size(); ++i) patches.data()[i] = rng.uniform();
  const auto a = m.encode(p, patches, idx);

  std::vector<int> order{4, 1, 5, 0, 3, 2};
  std::vector<int> idx2;
  Mat<double> patches2(idx.size(), cfg.patch_dim());
  for (std::size_t k = 0; k < order.size(); ++k) {
    idx2.push_back(idx[order[k]]);
    patches2.row(k) = patches.row(order[k]);
  }
  const auto b = m.encode(p, patches2, idx2);
  EXPECT_LE((a.cls - b.cls).cwiseAbs().maxCoeff(), 1e-9);
  for (int i : idx) EXPECT_LE((a.token(i) - b.token(i)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Encode, BadIndicesThrow) {
  const ModelConfig cfg = small_config();
  const Model<float> m(cfg);
  const auto p = m.init_params();
  const Mat<float> two = Mat<float>::Zero(2, cfg.patch_dim());
  const std::vector<int> dup{1, 1}, out_of_range{0, 16};
  EXPECT_THROW(m.encode(p, two, dup), InputError);
  EXPECT_THROW(m.encode(p, two, out_of_range), InputError);
  EXPECT_THROW(m.encode(p, Mat<float>::Zero(2, 5), std::vector<int>{0, 1}), InputError);
}

TEST(Restore, MaskTokensAndPositions) {
  const ModelConfig cfg = small_config();
  const Model<double> m(cfg);
  const auto p = perturbed_params(m, 4);
  const auto ex = random_example(cfg, {1, 4, 9}, 5);
  Mat<double> vis(ex.mask.visible.size(), cfg.patch_dim());
  for (std::size_t k = 0; k < ex.mask.visible.size(); ++k) vis.row(k) = ex.target.row(ex.mask.visible[k]);
  const auto enc = m.encode(p, vis, ex.mask.visible);
  const Mat<double> seq = m.restore_sequence(p, enc, ex.mask);
  ASSERT_EQ(seq.rows(), cfg.num_patches());
  const Mat<double> pos = sincos_2d_table(cfg.dec_dim, cfg.grid_side);
  const auto mask_token = p.mat(m.layout().find("dec.mask_token"));
  for (int i : ex.mask.masked)
    EXPECT_LE((seq.row(i) - pos.row(i) - mask_token.row(0)).cwiseAbs().maxCoeff(), 1e-12);

  // r = 0: every slot is a projected visible token.
  const auto ex0 = random_example(cfg, {}, 6);
  const auto enc0 = m.encode_full(p, ex0.target);
  const Mat<double> seq0 = m.restore_sequence(p, enc0, ex0.mask);
  for (int i = 0; i < cfg.num_patches(); ++i)
    EXPECT_GT((seq0.row(i) - pos.row(i) - mask_token.row(0)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Restore, KeyMismatchThrows) {
  const ModelConfig cfg = small_config();
  const Model<float> m(cfg);
  const auto p = m.init_params();
  const auto enc = m.encode(p, Mat<float>::Zero(2, cfg.patch_dim()), std::vector<int>{0, 1});
  const auto mask = views::make_mask(16, {0, 1, 2}, 0.1875);
  EXPECT_THROW(m.restore_sequence(p, enc, mask), InputError);
}

TEST(Decode, ShapeAndBottleneckSensitivity) {
  const ModelConfig cfg = small_config();
  const Model<double> m(cfg);
  const auto p = perturbed_params(m, 7);
  const auto ex = random_example(cfg, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14}, 8);
  const Mat<double> pred = m.predict(p, ex);
  EXPECT_EQ(pred.rows(), cfg.num_patches());
  EXPECT_EQ(pred.cols(), cfg.patch_dim());

  const auto src = m.encode_full(p, ex.source);
  Mat<double> vis(1, cfg.patch_dim());
  vis.row(0) = ex.target.row(15);
  const auto tgt = m.encode(p, vis, std::vector<int>{15});
  const Mat<double> restored = m.restore_sequence(p, tgt, ex.mask);
  const Mat<double> with = m.decode(p, src.cls, restored);
  const Mat<double> without = m.decode(p, RowVec<double>::Zero(cfg.enc_dim), restored);
  EXPECT_LE((with - pred).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_GT((with - without).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_TRUE(m.decode(p, src.cls, restored) == with);
}

TEST(Decode, SourceViewReachesPredictionsAtHighMaskRatio) {
  // r = 0.95 of 64 patches leaves 4 visible; the rest must come through the bottleneck.
  const ModelConfig cfg;
  const Model<float> m(cfg);
  const auto p = m.init_params();
  Rng rng(9);
  Example<float> a;
  a.source = Mat<float>::Random(64, cfg.patch_dim());
  a.target = Mat<float>::Random(64, cfg.patch_dim());
  a.targets = Mat<float>::Zero(64, cfg.patch_dim());
  a.mask = views::sample_mask(64, 0.95, rng);
  Example<float> b = a;
  b.source = Mat<float>::Random(64, cfg.patch_dim());
  EXPECT_GT((m.predict(p, a) - m.predict(p, b)).cwiseAbs().maxCoeff(), 0.0f);
}

TEST(MaskedMse, DocumentedExamples) {
  const auto mask1 = views::make_mask(4, {2}, 0.25);
  Mat<double> t = Mat<double>::Random(4, 192);
  EXPECT_EQ(masked_mse<double>(t, t, mask1).loss, 0.0);
  Mat<double> plus = t.array() + 1.0;
  EXPECT_EQ(masked_mse<double>(plus, t, mask1).loss, 192.0);

  const auto mask2 = views::make_mask(4, {0, 3}, 0.5);
  Mat<double> pred = Mat<double>::Zero(4, 192), tgt = Mat<double>::Zero(4, 192);
  pred(0, 0) = 1.0;
  pred(0, 1) = 1.0;
  pred(0, 2) = 1.0;  // squared norm 3
  pred(3, 0) = 2.0;
  pred(3, 1) = 1.0;  // squared norm 5
  pred(1, 5) = 100.0;  // visible, ignored
  EXPECT_EQ(masked_mse<double>(pred, tgt, mask2).loss, 4.0);

  const auto empty = views::make_mask(4, {}, 0.0);
  const MseResult r = masked_mse<double>(pred, tgt, empty);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_TRUE(r.empty_mask);
}

TEST(LossGrad, LossMatchesIndependentRecompute) {
  const ModelConfig cfg = small_config();
  const Model<double> m(cfg);
  const auto p = perturbed_params(m, 10);
  const auto ex = random_example(cfg, {0, 3, 6, 9, 12}, 11);
  const auto lg = m.loss_and_grad(p, ex);
  const Mat<double> pred = m.predict(p, ex);
  double sum = 0.0;
  for (int i : ex.mask.masked) sum += (pred.row(i) - ex.targets.row(i)).squaredNorm();
  EXPECT_NEAR(lg.loss, sum / 5.0, 1e-10);
}

TEST(LossGrad, ZeroHeadBiasGradientIsMeanResidual) {
  // With the head zeroed, pred = 0 and dL/db = -(2/|M|) * sum_{i in M} x_i.
  const ModelConfig cfg = small_config();
  const Model<double> m(cfg);
  auto p = perturbed_params(m, 12);
  const auto w = static_cast<std::size_t>(m.layout().find("dec.head.weight"));
  const auto b = static_cast<std::size_t>(m.layout().find("dec.head.bias"));
  p.mat(w).setZero();
  p.mat(b).setZero();
  const auto ex = random_example(cfg, {1, 2, 7, 8, 13}, 13);
  const auto lg = m.loss_and_grad(p, ex);
  RowVec<double> oracle = RowVec<double>::Zero(cfg.patch_dim());
  for (int i : ex.mask.masked) oracle -= ex.targets.row(i);
  oracle *= 2.0 / 5.0;
  EXPECT_LE((lg.grads.mat(b).row(0) - oracle).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LossGrad, MicroModelMatchesCentralDifferences) {
  const ModelConfig cfg = micro_config();
  const Model<double> m(cfg);
  const auto p = perturbed_params(m, 14);
  const auto ex = random_example(cfg, {1, 3}, 15);
  const auto r = testing::run_gradcheck(m, p, ex, 1e-5);
  EXPECT_GE(r.checked, 200u);
  EXPECT_EQ(r.tensors.size(), m.layout().tensors().size());
  EXPECT_LT(r.max_rel_error, 1e-4) << "worst tensor " << r.worst_tensor;
}

// Softmax is invariant to a shift shared by all keys, so the key bias has an
// exactly zero gradient; the analytic pass must reproduce that.
TEST(LossGrad, KeyBiasGradientVanishes) {
  const ModelConfig cfg = micro_config();
  const Model<double> m(cfg);
  const auto p = perturbed_params(m, 14);
  const auto lg = m.loss_and_grad(p, random_example(cfg, {1, 3}, 15));
  for (const auto& t : m.layout().tensors()) {
    if (t.name.find("attn.qkv.bias") == std::string::npos) continue;
    const int d = t.cols / 3;
    const auto g = lg.grads.vec(m.layout().find(t.name));
    EXPECT_LE(g.segment(d, d).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, lg.loss)) << t.name;
    EXPECT_GT(g.segment(0, d).cwiseAbs().maxCoeff(), 1e-6) << t.name;
  }
}

TEST(LossGrad, SiameseGradientIsSumOfPasses) {
  const ModelConfig cfg = micro_config();
  const Model<double> m(cfg);
  const auto p = perturbed_params(m, 16);
  const auto ex = random_example(cfg, {0, 2}, 17);
  const auto both = m.loss_and_grad(p, ex);
  const auto src = m.loss_and_grad(p, ex, {true, false});
  const auto tgt = m.loss_and_grad(p, ex, {false, true});
  for (std::size_t t = 0; t < m.layout().tensors().size(); ++t) {
    const auto& info = m.layout().tensors()[t];
    if (!info.name.starts_with("enc.")) continue;
    const auto sum = (src.grads.mat(t) + tgt.grads.mat(t)).eval();
    EXPECT_LE((both.grads.mat(t) - sum).cwiseAbs().maxCoeff(), 1e-12) << info.name;
    EXPECT_GT(src.grads.mat(t).cwiseAbs().maxCoeff() + tgt.grads.mat(t).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(LossGrad, RandomForwardPassesStayFinite) {
  const ModelConfig cfg = small_config();
  const Model<float> m(cfg);
  Rng rng(18);
  for (int trial = 0; trial < 1000; ++trial) {
    auto p = m.init_params();
    const float scale = static_cast<float>(rng.uniform(0.0, 3.0));
    for (float& v : p.flat()) v += scale * static_cast<float>(rng.normal());
    Example<float> ex;
    ex.source = Mat<float>::Random(16, cfg.patch_dim()) * 10.0f;
    ex.target = Mat<float>::Random(16, cfg.patch_dim()) * 10.0f;
    ex.targets = Mat<float>::Random(16, cfg.patch_dim());
    ex.mask = views::sample_mask(16, 0.75, rng);
    ASSERT_TRUE(m.predict(p, ex).allFinite()) << "trial " << trial;
  }
}

TEST(LossGrad, ExampleFromViewPair) {
  synth::SynthConfig sc;
  sc.n_frames = 5;
  const auto clip = synth::generate_clip(1, sc);
  const views::ViewConfig vc;
  Rng rng(19);
  const auto pair = views::make_view_pair(clip, 0, views::Variant::kCrop, rng, vc);
  const auto mask = views::sample_mask(vc.num_patches(), 0.9, rng);
  const Example<float> ex = make_example(pair, mask, 8);
  EXPECT_EQ(ex.source.rows(), 64);
  EXPECT_EQ(ex.targets.cols(), 192);
  const Model<float> m(ModelConfig{});
  const auto lg = m.loss_and_grad(m.init_params(), ex);
  EXPECT_TRUE(std::isfinite(lg.loss));
  EXPECT_GT(lg.loss, 0.0);
}

}  // namespace
}  // namespace crobo::nn
