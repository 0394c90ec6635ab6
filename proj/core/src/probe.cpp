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

#include "crobo/probe.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>

#include "crobo/analysis.hpp"
#include "crobo/errors.hpp"
#include "crobo/random.hpp"
#include "json.hpp"

namespace crobo::probe {
namespace {

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

Eigen::Index argmax(const Eigen::RowVectorXd& v) {
  Eigen::Index i = 0;
  v.maxCoeff(&i);
  return i;
}

// Column means and population standard deviations; constant columns get 1.
void column_stats(const Eigen::MatrixXd& x, Eigen::RowVectorXd& mean, Eigen::RowVectorXd& scale) {
  mean = x.colwise().mean();
  scale = ((x.rowwise() - mean).array().square().colwise().mean()).sqrt().matrix();
  for (Eigen::Index j = 0; j < scale.size(); ++j)
    if (!(scale(j) > 0.0)) scale(j) = 1.0;
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mean,
                            const Eigen::RowVectorXd& scale) {
  return (x.rowwise() - mean).array().rowwise() / scale.array();
}

}  // namespace

Eigen::RowVectorXd sprite_targets(const synth::ClipFrames& clip, int t, const views::ViewConfig& cfg) {
  if (t < 0 || t >= static_cast<int>(clip.metadata.size()) || clip.metadata[t].empty())
    throw InputError("sprite metadata missing for frame " + std::to_string(t));
  const auto& sprites = clip.metadata[t];
  std::size_t best = 0;
  for (std::size_t i = 1; i < sprites.size(); ++i)
    if (sprites[i].radius > sprites[best].radius) best = i;
  const synth::SpriteSpec& s = sprites[best];

  const Image& frame = clip.frames[t];
  const Box box = analysis::center_square(frame.width, frame.height);
  const double scale = static_cast<double>(cfg.view_size) / box.w;
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(kTargetCols);
  // Pixel-centre convention shared with the resampler.
  row(0) = (round_half_up(s.pos[0]) + 0.5 - box.x0) * scale - 0.5;
  row(1) = (round_half_up(s.pos[1]) + 0.5 - box.y0) * scale - 0.5;
  row(kShapeCol + static_cast<int>(s.shape)) = 1.0;
  const int color = synth::palette_index(s.color);
  if (color < 0) throw InputError("sprite colour is not in the palette");
  row(kColorCol + color) = 1.0;
  return row;
}

void split_by_clip(int n_clips, const SplitConfig& split, std::vector<int>& train, std::vector<int>& test) {
  if (n_clips < 2) throw InputError("probe split needs at least 2 clips");
  if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0))
    throw InputError("train_fraction must lie in (0, 1)");
  std::vector<int> ids(n_clips);
  for (int i = 0; i < n_clips; ++i) ids[i] = i;
  Rng rng(derive_seed(split.seed, "probe_split"));
  for (int i = n_clips; i > 1; --i) std::swap(ids[i - 1], ids[rng.uniform_int(0, i - 1)]);
  const int n_train = std::clamp(static_cast<int>(std::lround(split.train_fraction * n_clips)), 1, n_clips - 1);
  train.assign(ids.begin(), ids.begin() + n_train);
  test.assign(ids.begin() + n_train, ids.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
}

ProbeDataset build_probe_dataset(const nn::Model<float>& model, const nn::ParamSet<float>& params,
                                 const std::vector<synth::ClipFrames>& clips,
                                 const views::ViewConfig& cfg, const SplitConfig& split) {
  ProbeDataset ds;
  split_by_clip(static_cast<int>(clips.size()), split, ds.train_clips, ds.test_clips);
  Eigen::Index rows = 0;
  for (const auto& c : clips) rows += c.size();
  ds.features.resize(rows, model.config().enc_dim);
  ds.targets.resize(rows, kTargetCols);
  std::vector<char> is_train(clips.size(), 0);
  for (int c : ds.train_clips) is_train[c] = 1;
  Eigen::Index r = 0;
  for (std::size_t c = 0; c < clips.size(); ++c) {
    const analysis::Trajectory traj = analysis::embed_clip(model, params, clips[c], cfg);
    for (int t = 0; t < clips[c].size(); ++t, ++r) {
      ds.features.row(r) = traj.z.row(t);
      ds.targets.row(r) = sprite_targets(clips[c], t, cfg);
      ds.row_clip.push_back(static_cast<int>(c));
      ds.row_frame.push_back(t);
      (is_train[c] ? ds.train_rows : ds.test_rows).push_back(static_cast<int>(r));
    }
  }
  return ds;
}

ProbeDataset with_features(const ProbeDataset& ds, Eigen::MatrixXd features) {
  if (features.rows() != ds.features.rows()) throw InputError("with_features: row count mismatch");
  ProbeDataset out = ds;
  out.features = std::move(features);
  return out;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

Eigen::MatrixXd RidgeProbe::predict(const Eigen::MatrixXd& x) const {
  return (x * weights).rowwise() + bias;
}

RidgeProbe fit_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda, bool standardize_x) {
  if (x.rows() == 0 || x.rows() != y.rows()) throw InputError("fit_ridge: empty or mismatched inputs");
  if (!(lambda >= 0.0)) throw InputError("fit_ridge: lambda must be >= 0");
  const Eigen::Index d = x.cols();
  Eigen::RowVectorXd mu, sd;
  column_stats(x, mu, sd);
  if (!standardize_x) sd.setOnes();
  const Eigen::MatrixXd xs = standardize(x, mu, sd);
  const Eigen::RowVectorXd y_mean = y.colwise().mean();
  const Eigen::MatrixXd yc = y.rowwise() - y_mean;

  Eigen::MatrixXd a = xs.transpose() * xs;
  a.diagonal().array() += lambda;
  const Eigen::MatrixXd b = xs.transpose() * yc;
  Eigen::MatrixXd w;
  if (lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < d)
      throw NumericError("fit_ridge: normal equations are singular at lambda = 0; use lambda > 0");
    w = qr.solve(b);
  } else {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) throw NumericError("fit_ridge: Cholesky factorization failed");
    w = llt.solve(b);
  }
  RidgeProbe probe;
  probe.lambda = lambda;
  probe.weights = w.array().colwise() / sd.transpose().array();
  probe.bias = y_mean - mu * probe.weights;
  if (!probe.weights.allFinite() || !probe.bias.allFinite())
    throw NumericError("fit_ridge: non-finite solution");
  return probe;
}

RidgeProbe fit_ridge(const ProbeDataset& ds, double lambda) {
  return fit_ridge(select_rows(ds.features, ds.train_rows), select_rows(ds.targets, ds.train_rows), lambda);
}

ProbeScores score_predictions(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != kTargetCols || truth.cols() != kTargetCols)
    throw InputError("score_predictions: shape mismatch");
  if (truth.rows() == 0) throw InputError("score_predictions: no rows");
  ProbeScores s;
  s.n = static_cast<int>(truth.rows());
  s.pos_mae_px = (pred.leftCols(kPosCols) - truth.leftCols(kPosCols)).cwiseAbs().mean();
  int shape_hits = 0, color_hits = 0;
  for (Eigen::Index r = 0; r < truth.rows(); ++r) {
    shape_hits += argmax(pred.row(r).segment(kShapeCol, synth::kNumShapes)) ==
                  argmax(truth.row(r).segment(kShapeCol, synth::kNumShapes));
    color_hits += argmax(pred.row(r).segment(kColorCol, synth::kNumColors)) ==
                  argmax(truth.row(r).segment(kColorCol, synth::kNumColors));
  }
  s.shape_acc = static_cast<double>(shape_hits) / s.n;
  s.color_acc = static_cast<double>(color_hits) / s.n;
  return s;
}

ProbeScores eval_probe(const RidgeProbe& probe, const ProbeDataset& ds) {
  return score_predictions(probe.predict(select_rows(ds.features, ds.test_rows)),
                           select_rows(ds.targets, ds.test_rows));
}

std::string probe_json(const ProbeScores& s, const ProbeDataset& ds, double lambda,
                       const std::string& ckpt_hash, const std::string& head) {
  nlohmann::json j{{"pos_mae_px", s.pos_mae_px},
                   {"shape_acc", s.shape_acc},
                   {"color_acc", s.color_acc},
                   {"n_train", ds.train_rows.size()},
                   {"n_test", ds.test_rows.size()},
                   {"lambda", lambda},
                   {"ckpt_hash", ckpt_hash}};
  if (head != "ridge") j["head"] = head;
  return j.dump(2) + "\n";
}

Eigen::MatrixXd MlpProbe::predict(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd xs = standardize(x, x_mean, x_scale);
  const Eigen::MatrixXd h1 = ((xs * w1).rowwise() + b1).cwiseMax(0.0);
  const Eigen::MatrixXd h2 = ((h1 * w2).rowwise() + b2).cwiseMax(0.0);
  const Eigen::MatrixXd out = (h2 * w3).rowwise() + b3;
  return (out.array().rowwise() * y_scale.array()).rowwise() + y_mean.array();
}

MlpProbe fit_mlp(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const MlpConfig& cfg) {
  if (x.rows() == 0 || x.rows() != y.rows()) throw InputError("fit_mlp: empty or mismatched inputs");
  if (cfg.hidden < 1 || cfg.epochs < 1 || !(cfg.lr > 0.0)) throw ConfigError("fit_mlp: bad config");
  MlpProbe m;
  column_stats(x, m.x_mean, m.x_scale);
  column_stats(y, m.y_mean, m.y_scale);
  const Eigen::MatrixXd xs = standardize(x, m.x_mean, m.x_scale);
  const Eigen::MatrixXd ys = standardize(y, m.y_mean, m.y_scale);
  const Eigen::Index d = x.cols(), k = y.cols(), h = cfg.hidden;
  const double n = static_cast<double>(x.rows());

  Rng rng(derive_seed(cfg.seed, "mlp_init"));
  auto he = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd w(rows, cols);
    const double sd = std::sqrt(2.0 / static_cast<double>(rows));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal(0.0, sd);
    return w;
  };
  m.w1 = he(d, h);
  m.w2 = he(h, h);
  m.w3 = he(h, k) * 0.1;
  m.b1 = Eigen::RowVectorXd::Zero(h);
  m.b2 = Eigen::RowVectorXd::Zero(h);
  m.b3 = Eigen::RowVectorXd::Zero(k);

  std::vector<Eigen::MatrixXd*> mats{&m.w1, &m.w2, &m.w3};
  std::vector<Eigen::RowVectorXd*> vecs{&m.b1, &m.b2, &m.b3};
  std::vector<Eigen::MatrixXd> mm, mv;
  std::vector<Eigen::RowVectorXd> vm, vv;
  for (auto* p : mats) {
    mm.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    mv.push_back(mm.back());
  }
  for (auto* p : vecs) {
    vm.push_back(Eigen::RowVectorXd::Zero(p->size()));
    vv.push_back(vm.back());
  }
  const double b1c = 0.9, b2c = 0.999, eps = 1e-8;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const Eigen::MatrixXd z1 = (xs * m.w1).rowwise() + m.b1;
    const Eigen::MatrixXd a1 = z1.cwiseMax(0.0);
    const Eigen::MatrixXd z2 = (a1 * m.w2).rowwise() + m.b2;
    const Eigen::MatrixXd a2 = z2.cwiseMax(0.0);
    const Eigen::MatrixXd out = (a2 * m.w3).rowwise() + m.b3;
    const Eigen::MatrixXd g_out = 2.0 * (out - ys) / (n * static_cast<double>(k));
    const Eigen::MatrixXd g_a2 = g_out * m.w3.transpose();
    const Eigen::MatrixXd g_z2 = g_a2.array() * (z2.array() > 0.0).cast<double>();
    const Eigen::MatrixXd g_a1 = g_z2 * m.w2.transpose();
    const Eigen::MatrixXd g_z1 = g_a1.array() * (z1.array() > 0.0).cast<double>();
    const std::vector<Eigen::MatrixXd> gw{xs.transpose() * g_z1, a1.transpose() * g_z2, a2.transpose() * g_out};
    const std::vector<Eigen::RowVectorXd> gb{g_z1.colwise().sum(), g_z2.colwise().sum(), g_out.colwise().sum()};
    const double c1 = 1.0 - std::pow(b1c, epoch), c2 = 1.0 - std::pow(b2c, epoch);
    for (std::size_t i = 0; i < mats.size(); ++i) {
      mm[i] = b1c * mm[i] + (1.0 - b1c) * gw[i];
      mv[i] = b2c * mv[i] + (1.0 - b2c) * gw[i].cwiseProduct(gw[i]);
      *mats[i] -= cfg.lr * cfg.weight_decay * *mats[i];
      *mats[i] -= (cfg.lr * (mm[i] / c1).array() / ((mv[i] / c2).array().sqrt() + eps)).matrix();
      vm[i] = b1c * vm[i] + (1.0 - b1c) * gb[i];
      vv[i] = b2c * vv[i] + (1.0 - b2c) * gb[i].cwiseProduct(gb[i]);
      *vecs[i] -= (cfg.lr * (vm[i] / c1).array() / ((vv[i] / c2).array().sqrt() + eps)).matrix();
    }
  }
  if (!m.w1.allFinite() || !m.w3.allFinite()) throw NumericError("fit_mlp: training diverged");
  return m;
}

ProbeScores eval_mlp(const MlpProbe& probe, const ProbeDataset& ds) {
  return score_predictions(probe.predict(select_rows(ds.features, ds.test_rows)),
                           select_rows(ds.targets, ds.test_rows));
}

}  // namespace crobo::probe
