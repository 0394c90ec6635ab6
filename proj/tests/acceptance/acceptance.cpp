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

// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 when
// any criterion fails. The reference experiment (criteria 6 to 9) trains
// the default desk model and takes roughly half an hour on one core.

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crobo/ablation.hpp"
#include "crobo/analysis.hpp"
#include "crobo/checkpoint.hpp"
#include "crobo/image.hpp"
#include "crobo/model.hpp"
#include "crobo/probe.hpp"
#include "crobo/random.hpp"
#include "crobo/synthvideo.hpp"
#include "crobo/trainer.hpp"
#include "crobo/views.hpp"
#include "gradcheck.hpp"

namespace {

using namespace crobo;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// ---------------------------------------------------------------- 1

Outcome mask_cardinality() {
  const auto t0 = Clock::now();
  // Ratios as exact fractions so the oracle floor is integer arithmetic.
  const int ns[] = {16, 64, 196, 400};
  const int percents[] = {0, 75, 90, 95};
  int cases = 0, bad = 0;
  for (int n : ns)
    for (int pct : percents) {
      const int expect = n * pct / 100;
      const double r = pct / 100.0;
      for (std::uint64_t s = 0; s < 8; ++s) {
        Rng rng(derive_seed(101, "mask", {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(pct), s}));
        const views::MaskSet m = views::sample_mask(n, r, rng);
        std::set<int> uniq(m.masked.begin(), m.masked.end());
        const bool ok = views::masked_count(n, r) == expect && static_cast<int>(m.masked.size()) == expect &&
                        static_cast<int>(uniq.size()) == expect &&
                        static_cast<int>(m.visible.size()) == n - expect;
        bad += ok ? 0 : 1;
      }
      ++cases;
    }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 1.0,
          fmt("%d (N, r) cases x 8 draws, %d mismatches, %.3f s (limit 1 s)", cases, bad, secs)};
}

// ---------------------------------------------------------------- 2

Outcome gradient_check() {
  const auto t0 = Clock::now();
  const nn::ModelConfig cfg = testing::micro_config();
  const nn::Model<double> model(cfg);
  const auto params = testing::perturbed_params(model, 21);
  const auto ex = testing::random_example(cfg, {0, 2}, 22);
  const std::size_t total = params.flat().size();
  const std::size_t stride = std::max<std::size_t>(1, total / 400);
  const testing::GradCheckResult r = testing::run_gradcheck(model, params, ex, 1e-5, stride);
  const double secs = seconds_since(t0);
  const bool covers = r.tensors.size() == model.layout().tensors().size();
  return {r.checked >= 200 && covers && r.max_rel_error < 1e-4 && secs < 60.0,
          fmt("%zu of %zu parameters, %zu/%zu tensors, max rel err %.2e (limit 1e-4, worst %s), %.1f s",
              r.checked, total, r.tensors.size(), model.layout().tensors().size(), r.max_rel_error,
              r.worst_tensor.c_str(), secs)};
}

// ---------------------------------------------------------------- 3

Outcome loss_semantics() {
  const int pd = 192;
  views::MaskSet one = views::make_mask(4, {2}, 0.25);
  // Multiples of 1/8 keep every difference below exact in binary.
  nn::Mat<double> target(4, pd);
  for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = static_cast<double>(i % 17) / 8.0;
  const double l_equal = nn::masked_mse<double>(target, target, one).loss;
  const nn::Mat<double> plus_one = target.array() + 1.0;
  const double l_ones = nn::masked_mse<double>(plus_one, target, one).loss;

  // Two masked patches with squared norms 3 and 5.
  views::MaskSet two = views::make_mask(4, {0, 3}, 0.5);
  nn::Mat<double> pred = target;
  pred.row(0).head(3).array() += 1.0;
  pred(3, 0) += 2.0;
  pred(3, 1) += 1.0;
  const double l_mean = nn::masked_mse<double>(pred, target, two).loss;
  const bool ok = l_equal == 0.0 && l_ones == 192.0 && l_mean == 4.0;
  return {ok, fmt("equal -> %.17g, +1 on one 192-element patch -> %.17g, norms 3 and 5 -> %.17g", l_equal,
                  l_ones, l_mean)};
}

// ---------------------------------------------------------------- 4

analysis::Trajectory trajectory(std::initializer_list<std::vector<double>> rows) {
  analysis::Trajectory t;
  t.z.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  int r = 0;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) t.z(r, static_cast<Eigen::Index>(c)) = row[c];
    ++r;
  }
  return t;
}

// Angle between consecutive differences, written out independently.
double direct_angle_deg(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  const double c = a.dot(b) / (a.norm() * b.norm());
  return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

Outcome curvature_suite() {
  const double straight = analysis::curvature(trajectory({{0, 0}, {1, 0}, {2, 0}})).angles_deg.at(0);
  const double turn = analysis::curvature(trajectory({{0, 0}, {1, 0}, {1, 1}})).angles_deg.at(0);
  const double back = analysis::curvature(trajectory({{0, 0}, {1, 0}, {0, 0}})).angles_deg.at(0);
  const double analytic_err =
      std::max({std::abs(straight - 0.0), std::abs(turn - 90.0), std::abs(back - 180.0)});

  Rng rng(404);
  double inv_err = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int t = 5 + static_cast<int>(rng.uniform_int(0, 20));
    const int d = 2 + static_cast<int>(rng.uniform_int(0, 30));
    analysis::Trajectory a;
    a.z.resize(t, d);
    for (Eigen::Index i = 0; i < a.z.size(); ++i) a.z.data()[i] = rng.normal();
    analysis::Trajectory b = a;
    const double scale = std::exp(rng.uniform(-3.0, 3.0));
    Eigen::RowVectorXd shift(d);
    for (int j = 0; j < d; ++j) shift(j) = rng.normal(0.0, 10.0);
    b.z = (a.z * scale).rowwise() + shift;
    const auto ca = analysis::curvature(a), cb = analysis::curvature(b);
    if (ca.angles_deg.size() != cb.angles_deg.size()) return {false, "angle counts differ under scaling"};
    for (std::size_t i = 0; i < ca.angles_deg.size(); ++i)
      inv_err = std::max(inv_err, std::abs(ca.angles_deg[i] - cb.angles_deg[i]));
  }

  // Random walk: dim 256, 50 steps, 100 clips.
  std::vector<analysis::Trajectory> walks;
  double oracle_sum = 0.0, route_err = 0.0;
  int oracle_n = 0;
  for (int c = 0; c < 100; ++c) {
    analysis::Trajectory w;
    w.z.resize(51, 256);
    w.z.row(0).setZero();
    for (int t = 1; t <= 50; ++t)
      for (int j = 0; j < 256; ++j) w.z(t, j) = w.z(t - 1, j) + rng.normal();
    const auto series = analysis::curvature(w);
    for (int t = 0; t + 2 <= 50; ++t) {
      const double direct = direct_angle_deg(w.z.row(t + 1) - w.z.row(t), w.z.row(t + 2) - w.z.row(t + 1));
      route_err = std::max(route_err, std::abs(direct - series.angles_deg.at(t)));
      oracle_sum += direct;
      ++oracle_n;
    }
    walks.push_back(std::move(w));
  }
  const double walk_mean = analysis::mean_curvature(walks, 51).mean_deg;
  const double oracle_mean = oracle_sum / oracle_n;
  const bool ok = analytic_err <= 1e-9 && inv_err <= 1e-9 && std::abs(walk_mean - 90.0) <= 2.0 &&
                  route_err <= 1e-9 && std::abs(walk_mean - oracle_mean) <= 1e-9;
  return {ok, fmt("analytic err %.1e, invariance err %.1e over 1000 trajectories, random walk %.3f deg "
                  "(direct route %.3f, target 90 +- 2)",
                  analytic_err, inv_err, walk_mean, oracle_mean)};
}

// ---------------------------------------------------------------- 5

Outcome pca_oracle() {
  Rng rng(505);
  double err = 0.0;
  for (int k = 0; k < 100; ++k) {
    analysis::Trajectory t;
    t.z.resize(40, 16);
    for (Eigen::Index i = 0; i < t.z.size(); ++i) t.z.data()[i] = rng.normal() * (1.0 + (i % 16));
    const analysis::Pca2 p = analysis::pca2(t);
    const Eigen::MatrixXd c = t.z.rowwise() - t.z.colwise().mean();
    const Eigen::MatrixXd cov = c.transpose() * c / (t.z.rows() - 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::VectorXd ev = es.eigenvalues();  // ascending
    const double top1 = ev(15), top2 = ev(14);
    err = std::max({err, std::abs(p.explained[0] - top1) / std::max(1.0, top1),
                    std::abs(p.explained[1] - top2) / std::max(1.0, top2)});
  }
  return {err <= 1e-8, fmt("max deviation from dense eigendecomposition %.2e over 100 trajectories (limit 1e-8)", err)};
}

// ---------------------------------------------------------------- 10

// Patch i of a flipped view holds the mirror of patch mirror_index(i).
int mirror_index(int i, int g) { return (i / g) * g + (g - 1 - i % g); }

views::PatchMatrix mirror_patch_rows(const views::PatchMatrix& m, int p) {
  views::PatchMatrix out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (int y = 0; y < p; ++y)
      for (int x = 0; x < p; ++x)
        for (int ch = 0; ch < 3; ++ch) out(r, (y * p + x) * 3 + ch) = m(r, (y * p + (p - 1 - x)) * 3 + ch);
  return out;
}

bool inside(const views::CropGeometry& g, int w, int h) {
  return g.w >= 1 && g.h >= 1 && g.x0 >= 0 && g.y0 >= 0 && g.x0 + g.w <= w && g.y0 + g.h <= h;
}

Outcome flip_and_containment() {
  synth::SynthConfig sc;
  sc.frame_size = 48;
  sc.n_frames = 60;
  const auto clips = synth::generate_clips(1010, 4, sc);
  views::ViewConfig vc;
  vc.view_size = 32;
  vc.patch_size = 8;
  const int g = vc.grid_side();
  int flip_bad = 0, contain_bad = 0, flipped = 0;
  Rng rng(1011);
  for (int k = 0; k < 10000; ++k) {
    const auto& clip = clips[k % clips.size()];
    const auto variant = static_cast<views::Variant>(k % 3);
    const int t = static_cast<int>(rng.uniform_int(0, views::last_source_frame(clip.size(), variant, vc)));
    views::PairPlan plan = views::sample_pair_plan(clip.size(), sc.frame_size, sc.frame_size, t, variant, rng, vc);

    bool ok = inside(plan.source_geom, sc.frame_size, sc.frame_size) &&
              inside(plan.target_global_geom, sc.frame_size, sc.frame_size);
    if (variant == views::Variant::kTime) {
      ok = ok && plan.target_geom == plan.target_global_geom;
    } else {
      ok = ok && plan.target_geom.parent == views::CropParent::kGlobalView &&
           inside(plan.target_geom, vc.view_size, vc.view_size);
      if (variant == views::Variant::kCrop) ok = ok && plan.target_global_geom == plan.source_geom;
    }
    contain_bad += ok ? 0 : 1;

    plan.flip = true;
    const views::ViewPair on = views::realize_pair(clip, plan, vc);
    plan.flip = false;
    const views::ViewPair off = views::realize_pair(clip, plan, vc);
    ++flipped;
    bool sync = on.flip && !off.flip && on.source == flip_horizontal(off.source) &&
                on.target == flip_horizontal(off.target);
    const views::PatchGrid pon = views::patchify(on.target, vc.patch_size);
    const views::PatchGrid poff = views::patchify(off.target, vc.patch_size);
    const views::PatchMatrix mirrored = mirror_patch_rows(poff.patches, vc.patch_size);
    for (int i = 0; i < g * g && sync; ++i) sync = pon.patches.row(i) == mirrored.row(mirror_index(i, g));
    flip_bad += sync ? 0 : 1;
  }
  return {flip_bad == 0 && contain_bad == 0,
          fmt("10000 pairs over 3 variants: %d flip mismatches, %d containment violations", flip_bad, contain_bad)};
}

// ---------------------------------------------------------------- 6 to 9

struct Reference {
  fs::path work;
  std::vector<synth::ClipFrames> train, heldout;
  train::RunConfig cfg;
  train::TrainResult run_a;
  double seconds_a = 0.0;
  bool trained = false;
};

train::RunConfig reference_config(const fs::path& out) {
  train::RunConfig c;
  c.out_dir = out;
  c.epochs = 30;
  c.frames_per_clip = 8;  // 200 clips x 8 frames x 2 repeats / 32 = 100 steps per epoch
  c.views.mask_ratio = 0.9;
  c.views.variant = views::Variant::kCrop;
  c.seed = 7;
  c.deterministic = true;
  return c;
}

void ensure_trained(Reference& ref) {
  if (ref.trained) return;
  const auto t0 = Clock::now();
  ref.run_a = train::train_on(ref.cfg, ref.train);
  ref.seconds_a = seconds_since(t0);
  ref.trained = true;
}

Outcome reference_run(Reference& ref) {
  ensure_trained(ref);
  const auto rows = train::read_metrics(ref.run_a.metrics_csv);
  const double step0 = rows.front().loss;  // computed with the initial parameters
  const std::int64_t spe = ref.run_a.steps_per_epoch;
  double last = 0.0;
  for (std::size_t i = rows.size() - static_cast<std::size_t>(spe); i < rows.size(); ++i) last += rows[i].loss;
  last /= static_cast<double>(spe);
  const bool a = last < 0.5 * step0;

  const nn::Model<float> model(ref.cfg.resolved_model());
  const auto trained = ckpt::read_checkpoint(ref.run_a.final_checkpoint).params;
  const auto init = model.init_params();
  const auto pt = analysis::masked_psnr(model, trained, ref.heldout, ref.cfg.views, 4, 606);
  const auto pu = analysis::masked_psnr(model, init, ref.heldout, ref.cfg.views, 4, 606);
  const bool b = pt.psnr - pu.psnr >= 3.0;
  const bool fast = ref.seconds_a < 1800.0;
  return {a && b && fast,
          fmt("(a) %s: last-epoch loss %.3f vs step-0 %.3f, ratio %.3f (limit < 0.5); "
              "(b) %s: held-out masked PSNR %.2f dB trained vs %.2f dB untrained, gain %.2f dB (limit >= 3); "
              "%lld steps in %.0f s (limit 1800 s)",
              a ? "pass" : "FAIL", last, step0, last / step0, b ? "pass" : "FAIL", pt.psnr, pu.psnr,
              pt.psnr - pu.psnr, static_cast<long long>(rows.size()), ref.seconds_a)};
}

Outcome probe_separation(Reference& ref) {
  ensure_trained(ref);
  const nn::Model<float> model(ref.cfg.resolved_model());
  const auto trained = ckpt::read_checkpoint(ref.run_a.final_checkpoint).params;
  double mae_trained = 0.0, mae_random = 0.0;
  std::string per_seed;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const probe::SplitConfig split{0.8, derive_seed(s, "probe")};
    const auto ds = probe::build_probe_dataset(model, trained, ref.heldout, ref.cfg.views, split);
    const double t = probe::eval_probe(probe::fit_ridge(ds, 1e-3), ds).pos_mae_px;
    nn::ModelConfig rc = ref.cfg.resolved_model();
    rc.seed = derive_seed(s, "random_init");
    const nn::Model<float> random_model(rc);
    const auto dr = probe::build_probe_dataset(random_model, random_model.init_params(), ref.heldout,
                                               ref.cfg.views, split);
    const double r = probe::eval_probe(probe::fit_ridge(dr, 1e-3), dr).pos_mae_px;
    mae_trained += t / 3.0;
    mae_random += r / 3.0;
    per_seed += fmt(" [%.2f vs %.2f]", t, r);
  }
  return {mae_trained < mae_random,
          fmt("held-out position MAE trained %.3f px vs random-init %.3f px, margin %.3f px; per seed%s",
              mae_trained, mae_random, mae_random - mae_trained, per_seed.c_str())};
}

Outcome ablation(Reference& ref) {
  train::AblationConfig ac;
  ac.base = ref.cfg;
  ac.base.out_dir = ref.work / "ablation";
  ac.epochs = 10;
  ac.probe_seed = 808;
  const auto t0 = Clock::now();
  const train::AblationReport rep = train::run_ablation_matrix(ac, ref.train, ref.heldout);
  bool ok = rep.rows.size() == 9 && fs::exists(rep.csv) && fs::exists(rep.json) && fs::exists(rep.markdown);
  std::string cells;
  for (const auto& r : rep.rows) {
    ok = ok && std::isfinite(r.final_loss) && std::isfinite(r.pos_mae_px) && fs::exists(r.checkpoint);
    cells += fmt(" %s/%.2f=%.2f", r.variant.c_str(), r.mask_ratio, r.final_loss);
  }
  return {ok, fmt("%zu cells in %.0f s, report %s; last-epoch loss%s", rep.rows.size(), seconds_since(t0),
                  rep.markdown.string().c_str(), cells.c_str())};
}

Outcome determinism(Reference& ref) {
  ensure_trained(ref);
  train::RunConfig b = ref.cfg;
  b.out_dir = ref.work / "reference_b";
  train::train_on(b, ref.train);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(ref.cfg.out_dir))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), ref.cfg.out_dir));
  std::sort(files.begin(), files.end());
  int differ = 0;
  std::size_t bytes = 0;
  for (const auto& f : files) {
    const std::string x = read_bytes(ref.cfg.out_dir / f), y = read_bytes(b.out_dir / f);
    bytes += x.size();
    if (x != y || !fs::exists(b.out_dir / f)) ++differ;
  }
  const bool has = std::find(files.begin(), files.end(), fs::path("metrics.csv")) != files.end() &&
                   std::find(files.begin(), files.end(), fs::path("final/params.bin")) != files.end();
  return {has && differ == 0,
          fmt("%zu files (%zu bytes) compared across two runs, %d differ", files.size(), bytes, differ)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crobo acceptance criteria"};
  fs::path work = fs::temp_directory_path() / "crobo_acceptance";
  std::vector<int> only;
  app.add_option("--work", work, "Scratch directory for the reference experiment");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  std::error_code ec;
  fs::remove_all(work, ec);
  fs::create_directories(work);

  Reference ref;
  ref.work = work;
  ref.cfg = reference_config(work / "reference");
  const auto needs_data = [&] {
    if (!ref.train.empty()) return;
    ref.train = synth::generate_clips(1, 200, synth::SynthConfig{});
    ref.heldout = synth::generate_clips(2, 40, synth::SynthConfig{});
  };

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "mask cardinality", mask_cardinality},
      {2, "gradient check", gradient_check},
      {3, "loss semantics", loss_semantics},
      {4, "curvature suite", curvature_suite},
      {5, "PCA oracle", pca_oracle},
      {6, "reference desk run", [&] { needs_data(); return reference_run(ref); }},
      {7, "probe separation", [&] { needs_data(); return probe_separation(ref); }},
      {8, "ablation harness", [&] { needs_data(); return ablation(ref); }},
      {9, "determinism", [&] { needs_data(); return determinism(ref); }},
      {10, "flip sync and crop containment", flip_and_containment},
  };

  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    ++ran;
    failed += o.pass ? 0 : 1;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("acceptance: %d/%d passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
