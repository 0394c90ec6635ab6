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

#include "crobo/trainer.hpp"

#include <glog/logging.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "crobo/checkpoint.hpp"
#include "crobo/errors.hpp"
#include "crobo/hashing.hpp"
#include "crobo/random.hpp"
#include "json_io.hpp"

namespace crobo::train {
namespace {

constexpr const char* kMetricsHeader = "step,lr,loss,loss_per_elem,seconds";

std::string format_row(const MetricsRow& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.3f", static_cast<long long>(r.step), r.lr,
                r.loss, r.loss_per_elem, r.seconds);
  return buf;
}

std::string epoch_dir_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_epoch_%04d", epoch);
  return buf;
}

// Runs fn(slot) for every slot, either in order on this thread or spread over
// `threads` workers pulling slots from a shared counter.
template <typename Fn>
void for_each_slot(int count, int threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i, 0);
    return;
  }
  const int workers = std::min(threads, count);
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int i = next++; i < count; i = next++) fn(i, w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

nn::ModelConfig RunConfig::resolved_model() const {
  nn::ModelConfig m = model;
  m.patch_size = views.patch_size;
  m.grid_side = views.grid_side();
  m.seed = seed;
  return m;
}

void RunConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs >= epochs)
    throw ConfigError("warmup_epochs must lie in [0, epochs)");
  if (repeated_sampling < 1) throw ConfigError("repeated_sampling must be >= 1");
  if (frames_per_clip < 0) throw ConfigError("frames_per_clip must be >= 0");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be >= 0");
  if (!(base_lr >= 0.0) || !(min_lr >= 0.0)) throw ConfigError("learning rates must be >= 0");
  views.validate();
  resolved_model().validate();
}

std::string to_json(const RunConfig& c, bool include_out_dir) {
  json model = model_config_to_json(c.model);
  model.erase("patch_size");
  model.erase("grid_side");
  model.erase("seed");
  json v = view_config_to_json(c.views);
  v.erase("mask_ratio");
  v.erase("variant");
  json j{{"data_dir", c.data_dir.string()},
         {"batch_size", c.batch_size},
         {"epochs", c.epochs},
         {"warmup_epochs", c.warmup_epochs},
         {"base_lr", c.base_lr},
         {"min_lr", c.min_lr},
         {"weight_decay", c.adamw.weight_decay},
         {"betas", {c.adamw.beta1, c.adamw.beta2}},
         {"adam_eps", c.adamw.eps},
         {"repeated_sampling", c.repeated_sampling},
         {"frames_per_clip", c.frames_per_clip},
         {"mask_ratio", c.views.mask_ratio},
         {"variant", views::variant_name(c.views.variant)},
         {"seed", c.seed},
         {"model", model},
         {"views", v},
         {"checkpoint_every", c.checkpoint_every},
         {"deterministic", c.deterministic},
         {"threads", c.threads},
         {"grad_clip", c.grad_clip}};
  if (include_out_dir) j["out_dir"] = c.out_dir.string();
  return j.dump(1);
}

RunConfig run_config_from_json(const std::string& text, const RunConfig& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c = base;
  std::string path;
  if (j.contains("data_dir")) {
    read_opt(j, "data_dir", path);
    c.data_dir = path;
  }
  if (j.contains("out_dir")) {
    read_opt(j, "out_dir", path);
    c.out_dir = path;
  }
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "warmup_epochs", c.warmup_epochs);
  read_opt(j, "base_lr", c.base_lr);
  read_opt(j, "min_lr", c.min_lr);
  read_opt(j, "weight_decay", c.adamw.weight_decay);
  if (j.contains("betas")) {
    std::array<double, 2> b{};
    read_opt(j, "betas", b);
    c.adamw.beta1 = b[0];
    c.adamw.beta2 = b[1];
  }
  read_opt(j, "adam_eps", c.adamw.eps);
  read_opt(j, "repeated_sampling", c.repeated_sampling);
  read_opt(j, "frames_per_clip", c.frames_per_clip);
  read_opt(j, "seed", c.seed);
  read_opt(j, "checkpoint_every", c.checkpoint_every);
  read_opt(j, "deterministic", c.deterministic);
  read_opt(j, "threads", c.threads);
  read_opt(j, "grad_clip", c.grad_clip);
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"), c.model);
  if (j.contains("views")) c.views = view_config_from_json(j.at("views"), c.views);
  read_opt(j, "mask_ratio", c.views.mask_ratio);
  if (j.contains("variant")) {
    std::string v;
    read_opt(j, "variant", v);
    c.views.variant = views::variant_from_name(v);
  }
  return c;
}

std::string config_hash(const RunConfig& cfg) { return sha256_hex(to_json(cfg, false)); }

std::vector<EpochItem> epoch_items(const RunConfig& cfg, const std::vector<synth::ClipFrames>& clips,
                                   int epoch) {
  std::vector<EpochItem> items;
  for (std::size_t c = 0; c < clips.size(); ++c) {
    const int last = views::last_source_frame(clips[c].size(), cfg.views.variant, cfg.views);
    if (last < 0) continue;
    std::vector<int> frames(last + 1);
    for (int f = 0; f <= last; ++f) frames[f] = f;
    if (cfg.frames_per_clip > 0 && cfg.frames_per_clip < static_cast<int>(frames.size())) {
      Rng rng(derive_seed(cfg.seed, "frames",
                          {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(c)}));
      for (int i = 0; i < cfg.frames_per_clip; ++i)
        std::swap(frames[i], frames[rng.uniform_int(i, static_cast<std::int64_t>(frames.size()) - 1)]);
      frames.resize(cfg.frames_per_clip);
      std::sort(frames.begin(), frames.end());
    }
    for (int f : frames)
      for (int r = 0; r < cfg.repeated_sampling; ++r) items.push_back({static_cast<int>(c), f});
  }
  if (items.empty())
    throw InputError(std::string("no clip is long enough for variant '") +
                     views::variant_name(cfg.views.variant) + "'");
  Rng rng(derive_seed(cfg.seed, "order", {static_cast<std::uint64_t>(epoch)}));
  for (std::size_t i = items.size(); i > 1; --i)
    std::swap(items[i - 1], items[rng.uniform_int(0, static_cast<std::int64_t>(i) - 1)]);
  return items;
}

std::int64_t steps_per_epoch(const RunConfig& cfg, const std::vector<synth::ClipFrames>& clips) {
  const auto n = static_cast<std::int64_t>(epoch_items(cfg, clips, 0).size());
  return (n + cfg.batch_size - 1) / cfg.batch_size;
}

nn::Example<float> build_example(const RunConfig& cfg, const synth::ClipFrames& clip,
                                 const EpochItem& item, std::int64_t step, int slot) {
  Rng rng(derive_seed(cfg.seed, "pair",
                      {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(slot)}));
  const views::ViewPair pair = views::make_view_pair(clip, item.frame, cfg.views.variant, rng, cfg.views);
  const views::MaskSet mask = views::sample_mask(cfg.views.num_patches(), cfg.views.mask_ratio, rng);
  return nn::make_example(pair, mask, cfg.views.patch_size);
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw IoError("cannot open metrics file", csv.string());
  std::vector<MetricsRow> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRow r;
    long long step = 0;
    if (std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf,%lf", &step, &r.lr, &r.loss, &r.loss_per_elem,
                    &r.seconds) != 5)
      throw IoError("malformed metrics row '" + line + "'", csv.string());
    r.step = step;
    rows.push_back(r);
  }
  return rows;
}

TrainResult train(const RunConfig& cfg, const std::optional<std::filesystem::path>& resume_from) {
  if (!std::filesystem::exists(cfg.data_dir / "manifest.json"))
    throw IoError("dataset missing", cfg.data_dir.string());
  const auto clips = synth::read_dataset(cfg.data_dir);
  return train_on(cfg, clips, resume_from);
}

TrainResult train_on(const RunConfig& cfg, const std::vector<synth::ClipFrames>& clips,
                     const std::optional<std::filesystem::path>& resume_from) {
  namespace fs = std::filesystem;
  cfg.validate();
  if (clips.empty()) throw InputError("dataset is empty");
  if (cfg.out_dir.empty()) throw ConfigError("out_dir must be set");

  const nn::ModelConfig mcfg = cfg.resolved_model();
  const nn::Model<float> model(mcfg);
  const std::int64_t spe = steps_per_epoch(cfg, clips);
  const std::int64_t total = spe * cfg.epochs;
  const ScheduleConfig sched{cfg.base_lr, spe * cfg.warmup_epochs, total, cfg.min_lr};
  sched.validate();

  nn::ParamSet<float> params = model.init_params();
  AdamWState<float> opt(params.flat().size());
  std::int64_t start = 0;
  if (resume_from) {
    ckpt::Checkpoint ck = ckpt::read_checkpoint(*resume_from);
    if (!(ck.model == mcfg)) throw ConfigError("checkpoint model config differs from the run config");
    if (!ck.optimizer) throw InputError("checkpoint has no optimizer state: " + resume_from->string());
    if (ck.step > total) throw InputError("checkpoint step is beyond the configured schedule");
    params.flat() = ck.params.flat();
    opt = std::move(*ck.optimizer);
    start = ck.step;
  }

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory", cfg.out_dir.string());
  const fs::path metrics_path = cfg.out_dir / "metrics.csv";
  std::vector<std::string> kept;
  if (resume_from && fs::exists(metrics_path)) {
    for (const MetricsRow& r : read_metrics(metrics_path))
      if (r.step <= start) kept.push_back(format_row(r));
  }
  std::ofstream metrics(metrics_path, std::ios::trunc);
  if (!metrics) throw IoError("cannot open metrics file", metrics_path.string());
  metrics << kMetricsHeader << '\n';
  for (const auto& line : kept) metrics << line << '\n';
  metrics.flush();

  const std::string run_json = to_json(cfg, false);
  const std::vector<char> decay_mask = params.layout().decay_mask();
  const int pd = mcfg.patch_dim();
  const int workers = cfg.threads;
  std::vector<nn::ParamSet<float>> buffers(
      cfg.deterministic ? static_cast<std::size_t>(cfg.batch_size) : static_cast<std::size_t>(workers),
      nn::ParamSet<float>(params.layout_ptr()));
  nn::ParamSet<float> grads(params.layout_ptr());

  TrainResult result;
  result.total_steps = total;
  result.steps_per_epoch = spe;
  result.metrics_csv = metrics_path;

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<EpochItem> items;
  int items_epoch = -1;
  for (std::int64_t step = start; step < total; ++step) {
    const int epoch = static_cast<int>(step / spe);
    if (epoch != items_epoch) {
      items = epoch_items(cfg, clips, epoch);
      items_epoch = epoch;
    }
    const std::size_t begin = static_cast<std::size_t>(step % spe) * cfg.batch_size;
    const int count = static_cast<int>(std::min<std::size_t>(cfg.batch_size, items.size() - begin));
    const float scale = 1.0f / static_cast<float>(count);
    std::vector<double> losses(count, 0.0);

    try {
      for (auto& b : buffers) b.set_zero();
      for_each_slot(count, workers, [&](int slot, int worker) {
        const EpochItem& item = items[begin + slot];
        const nn::Example<float> ex = build_example(cfg, clips[item.clip], item, step, slot);
        nn::ParamSet<float>& acc = cfg.deterministic ? buffers[slot] : buffers[worker];
        losses[slot] = model.accumulate_loss_and_grad(params, ex, acc, scale);
      });
      // Fixed reduction order: slot order in deterministic mode, worker order otherwise.
      grads.set_zero();
      const std::size_t used = cfg.deterministic ? static_cast<std::size_t>(count) : buffers.size();
      for (std::size_t b = 0; b < used; ++b)
        for (std::size_t i = 0; i < grads.flat().size(); ++i) grads.flat()[i] += buffers[b].flat()[i];
      if (cfg.grad_clip > 0.0) clip_grad_norm(grads.flat(), cfg.grad_clip);

      double loss = 0.0;
      for (double l : losses) loss += l;
      loss /= count;
      const double lr = lr_at(step + 1, sched);
      adamw_update(params.flat(), grads.flat(), decay_mask, opt, lr, cfg.adamw);

      MetricsRow row{step + 1, lr, loss, loss / pd, 0.0};
      if (!cfg.deterministic)
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      metrics << format_row(row) << '\n';
      metrics.flush();
      result.metrics.push_back(row);
      if ((step + 1) % 50 == 0 || step + 1 == total)
        LOG(INFO) << "step " << step + 1 << "/" << total << " lr " << lr << " loss " << loss;
    } catch (const NumericError& e) {
      const fs::path diag = cfg.out_dir / "diagnostic";
      ckpt::write_checkpoint(diag, mcfg, params, step, &opt, run_json);
      write_file_atomic(diag / "error.txt", std::string(e.what()) + "\nstep " + std::to_string(step + 1) + "\n");
      throw NumericError(std::string(e.what()) + " at step " + std::to_string(step + 1) +
                         "; diagnostic checkpoint in " + diag.string());
    }

    if ((step + 1) % spe == 0) {
      const int done = static_cast<int>((step + 1) / spe);
      if (done % cfg.checkpoint_every == 0 && step + 1 != total)
        ckpt::write_checkpoint(cfg.out_dir / epoch_dir_name(done), mcfg, params, step + 1, &opt, run_json);
    }
  }
  result.final_checkpoint = cfg.out_dir / "final";
  ckpt::write_checkpoint(result.final_checkpoint, mcfg, params, total, &opt, run_json);
  return result;
}

}  // namespace crobo::train
