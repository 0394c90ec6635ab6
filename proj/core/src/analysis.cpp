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

#include "crobo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "crobo/errors.hpp"
#include "crobo/random.hpp"

namespace crobo::analysis {
namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr float kMaskedGray = 0.5f;
constexpr float kGutterValue = 1.0f;

void blit(const Image& src, Image& dst, int x_off) {
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      for (int c = 0; c < 3; ++c) dst.at(x_off + x, y, c) = src.at(x, y, c);
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open output file", path.string());
  return out;
}

}  // namespace

Box center_square(int w, int h) {
  const int side = std::min(w, h);
  return {(w - side) / 2, (h - side) / 2, side, side};
}

Image center_view(const Image& frame, const views::ViewConfig& cfg) {
  const Box box = center_square(frame.width, frame.height);
  if (box.w < cfg.grid_side())
    throw InputError("frame " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                     " is smaller than the patch grid");
  return resize_bicubic(frame, box, cfg.view_size, cfg.view_size);
}

Trajectory embed_clip(const nn::Model<float>& model, const nn::ParamSet<float>& params,
                      const synth::ClipFrames& clip, const views::ViewConfig& cfg, std::string clip_id) {
  Trajectory traj;
  traj.clip_id = std::move(clip_id);
  traj.z.resize(clip.size(), model.config().enc_dim);
  for (int t = 0; t < clip.size(); ++t) {
    const views::PatchGrid grid = views::patchify(center_view(clip.frames[t], cfg), cfg.patch_size);
    traj.z.row(t) = model.encode_full(params, grid.patches).cls.cast<double>();
  }
  return traj;
}

CurvatureSeries curvature(const Trajectory& traj, double eps) {
  if (traj.size() < 3) throw InputError("curvature needs at least 3 frames");
  CurvatureSeries out;
  double sum = 0.0;
  for (int t = 0; t + 2 < traj.size(); ++t) {
    const Eigen::RowVectorXd d1 = traj.z.row(t + 1) - traj.z.row(t);
    const Eigen::RowVectorXd d2 = traj.z.row(t + 2) - traj.z.row(t + 1);
    const double n1 = d1.norm(), n2 = d2.norm();
    if (n1 < eps || n2 < eps) {
      out.skipped_at.push_back(t);
      continue;
    }
    const double cosv = std::clamp(d1.dot(d2) / (n1 * n2), -1.0, 1.0);
    const double deg = std::acos(cosv) * kRadToDeg;
    out.angles_deg.push_back(deg);
    sum += deg;
  }
  out.degenerate = out.angles_deg.empty();
  out.mean_deg = out.degenerate ? std::numeric_limits<double>::quiet_NaN()
                                : sum / static_cast<double>(out.angles_deg.size());
  return out;
}

CurvatureSummary mean_curvature(const std::vector<Trajectory>& trajs, int first_k_frames) {
  if (trajs.empty()) throw InputError("mean_curvature: no trajectories");
  if (first_k_frames < 3) throw InputError("mean_curvature: first_k must be >= 3");
  CurvatureSummary summary;
  summary.first_k = first_k_frames;
  double sum = 0.0;
  int used = 0;
  for (const Trajectory& tr : trajs) {
    Trajectory head{tr.clip_id, tr.z.topRows(std::min(tr.size(), first_k_frames))};
    const CurvatureSeries s = curvature(head);
    summary.clips.push_back({tr.clip_id, static_cast<int>(s.angles_deg.size()), s.mean_deg, s.skipped()});
    if (!s.degenerate) {
      sum += s.mean_deg;
      ++used;
    }
  }
  summary.mean_deg = used > 0 ? sum / used : std::numeric_limits<double>::quiet_NaN();
  return summary;
}

void write_curvature_csv(const CurvatureSummary& summary, const std::filesystem::path& path) {
  std::ofstream out = open_csv(path);
  out << "clip_id,n_angles,mean_deg,skipped\n";
  out.precision(10);
  for (const ClipCurvature& c : summary.clips)
    out << c.clip_id << ',' << c.n_angles << ',' << c.mean_deg << ',' << c.skipped << '\n';
  if (!out) throw IoError("write failed", path.string());
}

SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& a, double tol, int max_sweeps) {
  if (a.rows() != a.cols()) throw InputError("jacobi_eigen: matrix is not square");
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd m = 0.5 * (a + a.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = m.norm();
  SymmetricEigen out;
  for (; out.sweeps < max_sweeps; ++out.sweeps) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
    if (std::sqrt(off) <= tol * scale || off == 0.0) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        const double tau = (m(q, q) - m(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double kp = m(k, p), kq = m(k, q);
          m(k, p) = c * kp - s * kq;
          m(k, q) = s * kp + c * kq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double pk = m(p, k), qk = m(q, k);
          m(p, k) = c * pk - s * qk;
          m(q, k) = s * pk + c * qk;
        }
        m(p, q) = m(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double kp = v(k, p), kq = v(k, q);
          v(k, p) = c * kp - s * kq;
          v(k, q) = s * kp + c * kq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return m(i, i) > m(j, j); });
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = m(order[i], order[i]);
    out.vectors.col(i) = v.col(order[i]);
  }
  return out;
}

Pca2 pca2(const Trajectory& traj) {
  if (traj.size() < 3) throw InputError("pca2 needs at least 3 frames");
  const int t_len = traj.size();
  const int d = traj.dim();
  const Eigen::RowVectorXd mean = traj.z.colwise().mean();
  const Eigen::MatrixXd x = traj.z.rowwise() - mean;
  const Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(t_len - 1);

  Pca2 out;
  out.total_variance = cov.trace();
  out.components = Eigen::MatrixXd::Zero(d, 2);
  out.points.assign(t_len, {0.0, 0.0});
  const double ref = traj.z.squaredNorm() / static_cast<double>(t_len);
  if (!(out.total_variance > 1e-28 * std::max(1.0, ref))) {
    out.zero_variance = true;
    return out;
  }
  const SymmetricEigen eig = jacobi_eigen(cov);
  for (int k = 0; k < std::min(2, d); ++k) {
    Eigen::VectorXd col = eig.vectors.col(k);
    for (int i = 0; i < d; ++i) {
      if (std::abs(col(i)) > 1e-12) {
        if (col(i) < 0.0) col = -col;
        break;
      }
    }
    out.components.col(k) = col;
    out.explained[k] = std::max(0.0, eig.values(k));
  }
  const Eigen::MatrixXd proj = x * out.components;
  for (int t = 0; t < t_len; ++t) out.points[t] = {proj(t, 0), proj(t, 1)};
  return out;
}

void write_pca_csv(const Pca2& pca, const std::filesystem::path& path) {
  std::ofstream out = open_csv(path);
  out << "t,p1,p2\n";
  out.precision(12);
  for (std::size_t t = 0; t < pca.points.size(); ++t)
    out << t << ',' << pca.points[t][0] << ',' << pca.points[t][1] << '\n';
  if (!out) throw IoError("write failed", path.string());
}

Reconstruction reconstruct(const nn::Model<float>& model, const nn::ParamSet<float>& params,
                           const views::ViewPair& pair, const views::MaskSet& mask) {
  const int p = model.config().patch_size;
  const nn::Example<float> ex = nn::make_example(pair, mask, p);
  const nn::Mat<float> pred = model.predict(params, ex);
  const views::PatchGrid truth = views::patchify(pair.target, p);
  const views::TargetPatches stats = views::normalize_targets(truth);
  const views::PatchMatrix den = views::denormalize(stats, pred);

  views::PatchGrid recon = truth;
  views::PatchGrid shown = truth;
  double sse = 0.0;
  for (int i : mask.masked) {
    for (Eigen::Index k = 0; k < den.cols(); ++k) {
      const float v = std::clamp(den(i, k), 0.0f, 1.0f);
      recon.patches(i, k) = v;
      const double diff = static_cast<double>(v) - truth.patches(i, k);
      sse += diff * diff;
    }
    shown.patches.row(i).setConstant(kMaskedGray);
  }

  Reconstruction out;
  out.masked_pixels = static_cast<int>(mask.masked.size() * den.cols());
  out.masked_mse = out.masked_pixels > 0 ? sse / out.masked_pixels : 0.0;
  out.masked_psnr = out.masked_mse > 0.0 ? -10.0 * std::log10(out.masked_mse)
                                         : std::numeric_limits<double>::infinity();
  out.reconstruction = views::unpatchify(recon);

  const int v = pair.target.width;
  out.panel = Image(4 * v + 3 * kPanelGutter, v, kGutterValue);
  const Image source = pair.source.width == v && pair.source.height == v
                           ? pair.source
                           : resize_bicubic(pair.source, {0, 0, pair.source.width, pair.source.height}, v, v);
  blit(source, out.panel, 0);
  blit(views::unpatchify(shown), out.panel, v + kPanelGutter);
  blit(out.reconstruction, out.panel, 2 * (v + kPanelGutter));
  blit(pair.target, out.panel, 3 * (v + kPanelGutter));
  return out;
}

Reconstruction render_reconstruction(const nn::Model<float>& model, const nn::ParamSet<float>& params,
                                     const views::ViewPair& pair, const views::MaskSet& mask,
                                     const std::filesystem::path& out) {
  Reconstruction r = reconstruct(model, params, pair, mask);
  std::error_code ec;
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path(), ec);
  if (ec) throw IoError("cannot create output directory", out.parent_path().string());
  write_png(r.panel, out);
  return r;
}

PsnrReport masked_psnr(const nn::Model<float>& model, const nn::ParamSet<float>& params,
                       const std::vector<synth::ClipFrames>& clips, const views::ViewConfig& cfg,
                       int pairs_per_clip, std::uint64_t seed) {
  if (pairs_per_clip < 1) throw InputError("pairs_per_clip must be >= 1");
  double sse = 0.0;
  double count = 0.0;
  PsnrReport report;
  for (std::size_t c = 0; c < clips.size(); ++c) {
    const int last = views::last_source_frame(clips[c].size(), cfg.variant, cfg);
    if (last < 0) continue;
    for (int j = 0; j < pairs_per_clip; ++j) {
      Rng rng(derive_seed(seed, "psnr", {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(j)}));
      const int t = static_cast<int>(rng.uniform_int(0, last));
      const views::ViewPair pair = views::make_view_pair(clips[c], t, cfg.variant, rng, cfg);
      const views::MaskSet mask = views::sample_mask(cfg.num_patches(), cfg.mask_ratio, rng);
      const Reconstruction r = reconstruct(model, params, pair, mask);
      sse += r.masked_mse * r.masked_pixels;
      count += r.masked_pixels;
      ++report.pairs;
    }
  }
  if (report.pairs == 0) throw InputError("no clip is long enough for the configured variant");
  report.mse = count > 0 ? sse / count : 0.0;
  report.psnr = report.mse > 0.0 ? -10.0 * std::log10(report.mse) : std::numeric_limits<double>::infinity();
  return report;
}

}  // namespace crobo::analysis
