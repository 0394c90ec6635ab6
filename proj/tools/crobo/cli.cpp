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

#include "crobo/cli.hpp"

#include <glog/logging.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "crobo/ablation.hpp"
#include "crobo/analysis.hpp"
#include "crobo/checkpoint.hpp"
#include "crobo/errors.hpp"
#include "crobo/hashing.hpp"
#include "crobo/probe.hpp"
#include "crobo/random.hpp"
#include "crobo/synthvideo.hpp"
#include "crobo/trainer.hpp"
#include "json.hpp"

namespace crobo::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool env_deterministic() {
  const char* v = std::getenv("CROBO_DETERMINISTIC");
  return v != nullptr && std::string(v) == "1";
}

std::string read_config_text(const std::string& path) {
  if (!fs::is_regular_file(path)) throw UsageError("config file not found: " + path);
  return read_file(path);
}

json read_config_json(const std::string& path) {
  try {
    json j = json::parse(read_config_text(path));
    if (!j.is_object()) throw UsageError("config file must hold a JSON object: " + path);
    return j;
  } catch (const json::parse_error& e) {
    throw UsageError("config file is not valid JSON: " + path + ": " + e.what());
  }
}

// Fills options that were not given on the command line from the config
// object; keys are option names with '-' or '_'.
void apply_config_defaults(CLI::App* sub, const json& cfg) {
  for (const auto& [key, value] : cfg.items()) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    if (name == "config") continue;
    CLI::Option* opt = sub->get_option_no_throw("--" + name);
    if (opt == nullptr) throw UsageError("unknown config key '" + key + "' for " + sub->get_name());
    if (opt->count() > 0) continue;
    auto text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_array()) {
      for (const json& v : value) opt->add_result(text(v));
    } else {
      opt->add_result(text(value));
    }
    opt->run_callback();
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

/// Collects what a run produced and writes the manifest atomically.
class RunRecord {
 public:
  RunRecord(std::string command, const std::vector<std::string>& args)
      : command_(std::move(command)), args_(args), started_(utc_now()) {}

  void set_config(json cfg) { config_ = std::move(cfg); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  void add_output(const fs::path& p) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.is_regular_file() && e.path().filename() != kManifestName) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) outputs_.push_back({f, sha256_file(f)});
    } else {
      outputs_.push_back({p, sha256_file(p)});
    }
  }

  void write(const fs::path& path) const {
    json outs = json::array();
    for (const auto& [p, h] : outputs_) outs.push_back({{"path", p.string()}, {"sha256", h}});
    json j{{"command", command_},
           {"argv", args_},
           {"config", config_},
           {"seed", seed_},
           {"version", CROBO_VERSION},
           {"started_at", started_},
           {"finished_at", utc_now()},
           {"outputs", outs}};
    write_file_atomic(path, j.dump(2) + "\n");
  }

  static constexpr const char* kManifestName = "run_manifest.json";

 private:
  std::string command_;
  std::vector<std::string> args_;
  std::string started_;
  json config_ = json::object();
  std::uint64_t seed_ = 0;
  std::vector<std::pair<fs::path, std::string>> outputs_;
};

// Manifest location for a file output: <dir>/<stem>.manifest.json.
fs::path manifest_for_file(const fs::path& out) {
  return out.parent_path() / (out.stem().string() + ".manifest.json");
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

struct Loaded {
  ckpt::Checkpoint ck;
  views::ViewConfig views;
};

Loaded load_checkpoint(const std::string& path) {
  require(!path.empty(), "--ckpt is required");
  Loaded l{ckpt::read_checkpoint(path), {}};
  if (!l.ck.run_config_json.empty()) l.views = train::run_config_from_json(l.ck.run_config_json).views;
  l.views.patch_size = l.ck.model.patch_size;
  l.views.view_size = l.ck.model.patch_size * l.ck.model.grid_side;
  return l;
}

std::vector<synth::ClipFrames> load_data(const std::string& dir) {
  require(!dir.empty(), "--data is required");
  if (!fs::exists(fs::path(dir) / "manifest.json")) throw IoError("dataset missing", dir);
  return synth::read_dataset(dir);
}

// ---------------------------------------------------------------- generate-data

struct GenerateOpts {
  std::uint64_t seed = 0;
  int clips = 200;
  synth::SynthConfig synth;
  std::string out;
};

void add_generate(CLI::App& app, GenerateOpts& o) {
  auto* sub = app.add_subcommand("generate-data", "Render synthetic sprite clips to PNG frames");
  sub->add_option("--config", "JSON file with option defaults");
  sub->add_option("--seed", o.seed, "Dataset seed")->capture_default_str();
  sub->add_option("--clips", o.clips, "Number of clips")->capture_default_str();
  sub->add_option("--frames", o.synth.n_frames, "Frames per clip")->capture_default_str();
  sub->add_option("--size", o.synth.frame_size, "Frame side in pixels")->capture_default_str();
  sub->add_option("--min-sprites", o.synth.min_sprites)->capture_default_str();
  sub->add_option("--max-sprites", o.synth.max_sprites)->capture_default_str();
  sub->add_option("--min-speed", o.synth.min_speed)->capture_default_str();
  sub->add_option("--max-speed", o.synth.max_speed)->capture_default_str();
  sub->add_option("--min-radius", o.synth.min_radius)->capture_default_str();
  sub->add_option("--max-radius", o.synth.max_radius)->capture_default_str();
  sub->add_option("--out", o.out, "Output directory");
}

int run_generate(const GenerateOpts& o, RunRecord& rec, std::ostream& out) {
  require(!o.out.empty(), "--out is required");
  require(o.clips >= 1, "--clips must be >= 1");
  o.synth.validate();
  const auto clips = synth::generate_clips(o.seed, o.clips, o.synth);
  synth::write_dataset(clips, o.out);
  rec.set_seed(o.seed);
  rec.set_config({{"seed", o.seed},
                  {"clips", o.clips},
                  {"frames", o.synth.n_frames},
                  {"size", o.synth.frame_size},
                  {"min_sprites", o.synth.min_sprites},
                  {"max_sprites", o.synth.max_sprites},
                  {"min_speed", o.synth.min_speed},
                  {"max_speed", o.synth.max_speed},
                  {"min_radius", o.synth.min_radius},
                  {"max_radius", o.synth.max_radius},
                  {"out", o.out}});
  rec.add_output(o.out);
  rec.write(fs::path(o.out) / RunRecord::kManifestName);
  out << "wrote " << o.clips << " clips to " << o.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- pretrain / ablate

struct TrainOverrides {
  std::string config;
  std::optional<std::string> data, out;
  std::optional<int> epochs, batch_size, threads, frames_per_clip, warmup_epochs, checkpoint_every;
  std::optional<std::uint64_t> seed;
  std::optional<double> mask_ratio, lr;
  std::optional<std::string> variant;
  bool deterministic = false;
};

void add_train_overrides(CLI::App* sub, TrainOverrides& o, bool ablation) {
  sub->add_option("--config", o.config, "Run config JSON (defaults < file < flags)");
  sub->add_option("--data", o.data, "Training dataset directory");
  sub->add_option("--out", o.out, "Output directory");
  sub->add_option("--epochs", o.epochs, ablation ? "Epochs per cell (default 10)" : "Training epochs");
  sub->add_option("--batch-size", o.batch_size);
  sub->add_option("--threads", o.threads);
  sub->add_option("--frames-per-clip", o.frames_per_clip, "Frames sampled per clip per epoch (0 = all)");
  sub->add_option("--warmup-epochs", o.warmup_epochs);
  sub->add_option("--checkpoint-every", o.checkpoint_every, "Checkpoint period in epochs");
  sub->add_option("--seed", o.seed);
  sub->add_option("--lr", o.lr, "Base learning rate");
  if (!ablation) {
    sub->add_option("--mask-ratio", o.mask_ratio);
    sub->add_option("--variant", o.variant, "crop, time or timecrop");
  }
  sub->add_flag("--deterministic", o.deterministic, "Fixed-order reduction and zeroed wall-clock column");
}

train::RunConfig resolve_run_config(const TrainOverrides& o, json* extra = nullptr) {
  train::RunConfig cfg;
  if (!o.config.empty()) {
    const std::string text = read_config_text(o.config);
    if (extra != nullptr) {
      json j = json::parse(text, nullptr, false);
      if (j.is_discarded() || !j.is_object()) throw UsageError("config file is not a JSON object: " + o.config);
      *extra = json::object();
      for (const char* k : {"variants", "ratios", "ablation_epochs", "probe_data", "probe_lambda"})
        if (j.contains(k)) {
          (*extra)[k] = j[k];
          j.erase(k);
        }
      cfg = train::run_config_from_json(j.dump());
    } else {
      cfg = train::run_config_from_json(text);
    }
  }
  if (o.data) cfg.data_dir = *o.data;
  if (o.out) cfg.out_dir = *o.out;
  if (o.epochs && extra == nullptr) cfg.epochs = *o.epochs;
  if (o.batch_size) cfg.batch_size = *o.batch_size;
  if (o.threads) cfg.threads = *o.threads;
  if (o.frames_per_clip) cfg.frames_per_clip = *o.frames_per_clip;
  if (o.warmup_epochs) cfg.warmup_epochs = *o.warmup_epochs;
  if (o.checkpoint_every) cfg.checkpoint_every = *o.checkpoint_every;
  if (o.seed) cfg.seed = *o.seed;
  if (o.lr) cfg.base_lr = *o.lr;
  if (o.mask_ratio) cfg.views.mask_ratio = *o.mask_ratio;
  if (o.variant) cfg.views.variant = views::variant_from_name(*o.variant);
  if (o.deterministic || env_deterministic()) cfg.deterministic = true;
  require(!cfg.data_dir.empty(), "training data directory is required (--data or data_dir)");
  require(!cfg.out_dir.empty(), "output directory is required (--out or out_dir)");
  return cfg;
}

struct PretrainOpts {
  TrainOverrides t;
  std::string resume;
};

int run_pretrain(const PretrainOpts& o, RunRecord& rec, std::ostream& out) {
  train::RunConfig cfg = resolve_run_config(o.t);
  cfg.validate();
  std::optional<fs::path> resume;
  if (!o.resume.empty()) resume = o.resume;
  const train::TrainResult r = train::train(cfg, resume);
  rec.set_seed(cfg.seed);
  rec.set_config(json::parse(train::to_json(cfg)));
  rec.add_output(cfg.out_dir);
  rec.write(cfg.out_dir / RunRecord::kManifestName);
  out << "trained " << r.total_steps << " steps (" << r.steps_per_epoch << " per epoch); final checkpoint "
      << r.final_checkpoint.string() << "\n";
  if (!r.metrics.empty()) out << "final loss " << r.metrics.back().loss << "\n";
  return kExitOk;
}

struct AblateOpts {
  TrainOverrides t;
  std::vector<std::string> variants;
  std::vector<double> ratios;
  std::optional<std::string> probe_data;
  std::optional<double> probe_lambda;
};

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

int run_ablate(const AblateOpts& o, RunRecord& rec, std::ostream& out) {
  json extra;
  train::AblationConfig acfg;
  acfg.base = resolve_run_config(o.t, &extra);
  acfg.base.validate();
  try {
    if (extra.contains("ablation_epochs")) acfg.epochs = extra["ablation_epochs"].get<int>();
    if (extra.contains("probe_lambda")) acfg.probe_lambda = extra["probe_lambda"].get<double>();
    if (extra.contains("probe_data")) acfg.probe_data_dir = extra["probe_data"].get<std::string>();
    if (extra.contains("ratios")) acfg.ratios = extra["ratios"].get<std::vector<double>>();
    if (extra.contains("variants")) {
      acfg.variants.clear();
      for (const auto& v : extra["variants"].get<std::vector<std::string>>())
        acfg.variants.push_back(views::variant_from_name(v));
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad ablation key in config: ") + e.what());
  }
  if (o.t.epochs) acfg.epochs = *o.t.epochs;
  if (o.probe_lambda) acfg.probe_lambda = *o.probe_lambda;
  if (o.probe_data) acfg.probe_data_dir = *o.probe_data;
  if (!o.ratios.empty()) acfg.ratios = o.ratios;
  if (!o.variants.empty()) {
    acfg.variants.clear();
    for (const auto& v : split_list(o.variants)) acfg.variants.push_back(views::variant_from_name(v));
  }
  acfg.probe_seed = derive_seed(acfg.base.seed, "probe");
  const train::AblationReport report = train::run_ablation_matrix(acfg);

  json cfg = json::parse(train::to_json(acfg.base));
  cfg["ablation_epochs"] = acfg.epochs;
  cfg["ratios"] = acfg.ratios;
  cfg["variants"] = json::array();
  for (auto v : acfg.variants) cfg["variants"].push_back(views::variant_name(v));
  cfg["probe_lambda"] = acfg.probe_lambda;
  cfg["probe_data"] = acfg.probe_data_dir.string();
  rec.set_config(cfg);
  rec.set_seed(acfg.base.seed);
  rec.add_output(acfg.base.out_dir);
  rec.write(acfg.base.out_dir / RunRecord::kManifestName);
  out << "ablation: " << report.rows.size() << " cells; report " << report.markdown.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- reconstruct

struct ReconstructOpts {
  std::string ckpt, data, out;
  int n = 8;
  std::uint64_t seed = 0;
  std::optional<double> mask_ratio;
  std::optional<std::string> variant;
};

int run_reconstruct(const ReconstructOpts& o, RunRecord& rec, std::ostream& out) {
  require(!o.out.empty(), "--out is required");
  require(o.n >= 1, "--n must be >= 1");
  Loaded l = load_checkpoint(o.ckpt);
  if (o.mask_ratio) l.views.mask_ratio = *o.mask_ratio;
  if (o.variant) l.views.variant = views::variant_from_name(*o.variant);
  l.views.validate();
  const auto clips = load_data(o.data);
  const nn::Model<float> model(l.ck.model);
  fs::create_directories(o.out);

  json items = json::array();
  double sse = 0.0, count = 0.0;
  for (int i = 0; i < o.n; ++i) {
    const int c = i % static_cast<int>(clips.size());
    const int last = views::last_source_frame(clips[c].size(), l.views.variant, l.views);
    if (last < 0) throw InputError("clip " + std::to_string(c) + " is too short for the variant");
    Rng rng(derive_seed(o.seed, "reconstruct", {static_cast<std::uint64_t>(i)}));
    const int t = static_cast<int>(rng.uniform_int(0, last));
    const views::ViewPair pair = views::make_view_pair(clips[c], t, l.views.variant, rng, l.views);
    const views::MaskSet mask = views::sample_mask(l.views.num_patches(), l.views.mask_ratio, rng);
    char name[32];
    std::snprintf(name, sizeof(name), "recon_%04d.png", i);
    const auto r = analysis::render_reconstruction(model, l.ck.params, pair, mask, fs::path(o.out) / name);
    sse += r.masked_mse * r.masked_pixels;
    count += r.masked_pixels;
    items.push_back({{"file", name},
                     {"clip", c},
                     {"frame_source", pair.frame_index_source},
                     {"frame_target", pair.frame_index_target},
                     {"masked_psnr_db", std::isfinite(r.masked_psnr) ? json(r.masked_psnr) : json(nullptr)}});
  }
  const double mse = count > 0 ? sse / count : 0.0;
  const double psnr = mse > 0 ? -10.0 * std::log10(mse) : 0.0;
  json summary{{"n", o.n},
               {"mask_ratio", l.views.mask_ratio},
               {"variant", views::variant_name(l.views.variant)},
               {"pooled_masked_psnr_db", psnr},
               {"ckpt_hash", ckpt::checkpoint_hash(o.ckpt)},
               {"items", items}};
  write_file_atomic(fs::path(o.out) / "reconstruct.json", summary.dump(2) + "\n");
  rec.set_seed(o.seed);
  rec.set_config({{"ckpt", o.ckpt}, {"data", o.data}, {"out", o.out}, {"n", o.n}, {"seed", o.seed},
                  {"mask_ratio", l.views.mask_ratio}, {"variant", views::variant_name(l.views.variant)}});
  rec.add_output(o.out);
  rec.write(fs::path(o.out) / RunRecord::kManifestName);
  out << "wrote " << o.n << " reconstructions to " << o.out << "; pooled masked PSNR " << psnr << " dB\n";
  return kExitOk;
}

// ---------------------------------------------------------------- straightness

struct StraightnessOpts {
  std::string ckpt, data, out;
  int first_k = 50;
  bool pca = false;
};

int run_straightness(const StraightnessOpts& o, RunRecord& rec, std::ostream& out) {
  require(!o.out.empty(), "--out is required");
  const Loaded l = load_checkpoint(o.ckpt);
  const auto clips = load_data(o.data);
  const auto manifest = synth::read_manifest(o.data);
  const nn::Model<float> model(l.ck.model);
  std::vector<analysis::Trajectory> trajs;
  for (std::size_t c = 0; c < clips.size(); ++c)
    trajs.push_back(analysis::embed_clip(model, l.ck.params, clips[c], l.views, manifest.clips[c].id));
  const analysis::CurvatureSummary s = analysis::mean_curvature(trajs, o.first_k);
  const fs::path out_path(o.out);
  ensure_parent(out_path);
  analysis::write_curvature_csv(s, out_path);
  rec.add_output(out_path);
  if (o.pca) {
    const fs::path dir = out_path.parent_path() / (out_path.stem().string() + "_pca");
    for (const auto& tr : trajs) {
      const fs::path p = dir / (tr.clip_id + ".csv");
      analysis::write_pca_csv(analysis::pca2(tr), p);
      rec.add_output(p);
    }
  }
  rec.set_config({{"ckpt", o.ckpt}, {"data", o.data}, {"out", o.out}, {"first_k", o.first_k}, {"pca", o.pca}});
  rec.write(manifest_for_file(out_path));
  out << "mean curvature " << s.mean_deg << " deg over " << s.clips.size() << " clips\n";
  return kExitOk;
}

// ---------------------------------------------------------------- probe

struct ProbeOpts {
  std::string ckpt, data, out;
  double lambda = 1e-3;
  std::uint64_t seed = 0;
  std::string head = "ridge";
  int mlp_epochs = 500;
  bool random_init = false;
};

int run_probe(const ProbeOpts& o, RunRecord& rec, std::ostream& out) {
  require(!o.out.empty(), "--out is required");
  require(o.head == "ridge" || o.head == "mlp", "--head must be ridge or mlp");
  const Loaded l = load_checkpoint(o.ckpt);
  const auto clips = load_data(o.data);
  nn::ModelConfig mcfg = l.ck.model;
  std::string hash = ckpt::checkpoint_hash(o.ckpt);
  nn::ParamSet<float> params = l.ck.params;
  if (o.random_init) {
    mcfg.seed = derive_seed(o.seed, "random_init");
    params = nn::Model<float>(mcfg).init_params();
    hash = "random-init";
  }
  const nn::Model<float> model(mcfg);
  const probe::ProbeDataset ds =
      probe::build_probe_dataset(model, params, clips, l.views, {0.8, derive_seed(o.seed, "probe")});
  probe::ProbeScores s;
  if (o.head == "ridge") {
    s = probe::eval_probe(probe::fit_ridge(ds, o.lambda), ds);
  } else {
    probe::MlpConfig mc;
    mc.epochs = o.mlp_epochs;
    mc.seed = derive_seed(o.seed, "mlp");
    s = probe::eval_mlp(probe::fit_mlp(probe::select_rows(ds.features, ds.train_rows),
                                       probe::select_rows(ds.targets, ds.train_rows), mc),
                        ds);
  }
  const fs::path out_path(o.out);
  ensure_parent(out_path);
  write_file_atomic(out_path, probe::probe_json(s, ds, o.lambda, hash, o.head));
  rec.set_seed(o.seed);
  rec.set_config({{"ckpt", o.ckpt}, {"data", o.data}, {"out", o.out}, {"lambda", o.lambda},
                  {"seed", o.seed}, {"head", o.head}, {"random_init", o.random_init}});
  rec.add_output(out_path);
  rec.write(manifest_for_file(out_path));
  out << "probe: pos MAE " << s.pos_mae_px << " px, shape acc " << s.shape_acc << ", colour acc "
      << s.color_acc << "\n";
  return kExitOk;
}

void init_logging() {
  static bool done = false;
  if (done) return;
  done = true;
  FLAGS_logtostderr = true;
  google::InitGoogleLogging("crobo");
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  init_logging();
  CLI::App app{"crobo: bottleneck-token masked reconstruction on synthetic video", "crobo"};
  app.set_version_flag("--version", CROBO_VERSION);
  app.require_subcommand(1);

  GenerateOpts gen;
  add_generate(app, gen);

  PretrainOpts pre;
  auto* pretrain = app.add_subcommand("pretrain", "Train the encoder-decoder on a dataset");
  add_train_overrides(pretrain, pre.t, false);
  pretrain->add_option("--resume", pre.resume, "Checkpoint directory to resume from");

  AblateOpts abl;
  auto* ablate = app.add_subcommand("ablate", "Train the variant x mask-ratio matrix and write a report");
  add_train_overrides(ablate, abl.t, true);
  ablate->add_option("--variants", abl.variants, "Comma-separated variants")->delimiter(',');
  ablate->add_option("--ratios", abl.ratios, "Comma-separated mask ratios")->delimiter(',');
  ablate->add_option("--probe-data", abl.probe_data, "Dataset for the per-cell probe");
  ablate->add_option("--probe-lambda", abl.probe_lambda);

  ReconstructOpts rc;
  auto* reconstruct = app.add_subcommand("reconstruct", "Render masked-reconstruction panels");
  reconstruct->add_option("--config", "JSON file with option defaults");
  reconstruct->add_option("--ckpt", rc.ckpt, "Checkpoint directory");
  reconstruct->add_option("--data", rc.data, "Dataset directory");
  reconstruct->add_option("--n", rc.n, "Number of panels")->capture_default_str();
  reconstruct->add_option("--out", rc.out, "Output directory");
  reconstruct->add_option("--seed", rc.seed)->capture_default_str();
  reconstruct->add_option("--mask-ratio", rc.mask_ratio);
  reconstruct->add_option("--variant", rc.variant);

  StraightnessOpts st;
  auto* straight = app.add_subcommand("straightness", "Local curvature of bottleneck trajectories");
  straight->add_option("--config", "JSON file with option defaults");
  straight->add_option("--ckpt", st.ckpt, "Checkpoint directory");
  straight->add_option("--data", st.data, "Dataset directory");
  straight->add_option("--first-k", st.first_k, "Frames per clip")->capture_default_str();
  straight->add_option("--out", st.out, "Report CSV");
  straight->add_flag("--pca", st.pca, "Also write per-clip 2D PCA trajectories");

  ProbeOpts pr;
  auto* probe_cmd = app.add_subcommand("probe", "Linear probe of sprite position and identity");
  probe_cmd->add_option("--config", "JSON file with option defaults");
  probe_cmd->add_option("--ckpt", pr.ckpt, "Checkpoint directory");
  probe_cmd->add_option("--data", pr.data, "Dataset directory");
  probe_cmd->add_option("--lambda", pr.lambda, "Ridge penalty on standardized features")->capture_default_str();
  probe_cmd->add_option("--out", pr.out, "Output JSON");
  probe_cmd->add_option("--seed", pr.seed, "Split seed")->capture_default_str();
  probe_cmd->add_option("--head", pr.head, "ridge or mlp")->capture_default_str();
  probe_cmd->add_option("--mlp-epochs", pr.mlp_epochs)->capture_default_str();
  probe_cmd->add_flag("--random-init", pr.random_init, "Probe a freshly initialised encoder instead");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(std::move(argv_rev));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << CROBO_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  RunRecord rec(sub->get_name(), std::vector<std::string>(args.begin() + 1, args.end()));
  try {
    for (CLI::App* s : {app.get_subcommand("generate-data"), reconstruct, straight, probe_cmd}) {
      if (s != sub) continue;
      const CLI::Option* c = s->get_option("--config");
      if (c->count() > 0) apply_config_defaults(s, read_config_json(c->as<std::string>()));
    }
    if (sub->get_name() == "generate-data") return run_generate(gen, rec, out);
    if (sub == pretrain) return run_pretrain(pre, rec, out);
    if (sub == ablate) return run_ablate(abl, rec, out);
    if (sub == reconstruct) return run_reconstruct(rc, rec, out);
    if (sub == straight) return run_straightness(st, rec, out);
    return run_probe(pr, rec, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << " (" << e.path() << ")\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  if (args.empty()) args.emplace_back("crobo");
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace crobo::cli
