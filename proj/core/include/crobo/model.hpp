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

#ifndef CROBO_MODEL_HPP
#define CROBO_MODEL_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "crobo/params.hpp"
#include "crobo/views.hpp"

namespace crobo::nn {

namespace detail {
struct ModelIds;
}

struct ModelConfig {
  int enc_dim = 64;
  int enc_depth = 3;
  int enc_heads = 4;
  int dec_dim = 48;
  int dec_depth = 2;
  int dec_heads = 4;
  double mlp_ratio = 4.0;
  int patch_size = 8;
  int grid_side = 8;
  std::uint64_t seed = 0;

  int num_patches() const { return grid_side * grid_side; }
  int patch_dim() const { return patch_size * patch_size * 3; }
  int enc_hidden() const;
  int dec_hidden() const;
  void validate() const;  // throws ConfigError

  bool operator==(const ModelConfig&) const = default;
};

// 2D sine-cosine table, one row per grid cell in row-major order. The first
// half of each row encodes the column, the second half the row.
Mat<double> sincos_2d_table(int dim, int grid_side);

template <typename T>
struct EncodeOutput {
  RowVec<T> cls;            // final-layer class token
  std::vector<int> indices;  // patch index of each row of `tokens`
  Mat<T> tokens;             // one row per supplied patch, in input order

  // Row of `tokens` for a grid index; throws InputError if absent.
  RowVec<T> token(int index) const;
};

/// Patches, mask and per-patch normalized targets for one view pair.
template <typename T>
struct Example {
  Mat<T> source;   // N x patch_dim, all source patches
  Mat<T> target;   // N x patch_dim, all target patches (only visible rows are encoded)
  Mat<T> targets;  // N x patch_dim, normalized reconstruction targets
  views::MaskSet mask;
};

Example<float> make_example(const views::ViewPair& pair, const views::MaskSet& mask, int patch_size);

template <typename T>
Example<T> cast_example(const Example<float>& ex) {
  return {ex.source.cast<T>(), ex.target.cast<T>(), ex.targets.cast<T>(), ex.mask};
}

struct MseResult {
  double loss = 0.0;
  bool empty_mask = false;  // |M| == 0, loss defined as 0
};

// (1/|M|) sum over masked rows of the squared L2 distance between
// prediction and target rows.
template <typename T>
MseResult masked_mse(const Mat<T>& pred, const Mat<T>& target, const views::MaskSet& mask);

// Switches for isolating the two encoder passes; both on for training.
struct GradRouting {
  bool source = true;
  bool target = true;
};

template <typename T>
struct LossGrad {
  double loss = 0.0;
  ParamSet<T> grads;
};

/// Siamese encoder, bottleneck-conditioned decoder and masked reconstruction
/// loss, with reverse-mode gradients written out by hand.
///
/// Encoder: patch projection, class token at slot 0 (learned positional
/// vector), fixed sine-cosine positions for patch slots, pre-norm blocks
/// (multi-head self-attention, GELU MLP), final layer norm.
/// Decoder: the encoder-to-decoder projection is shared by the bottleneck and
/// the visible target tokens; the projected bottleneck sits at position 0
/// without a positional embedding, followed by the N restored target tokens;
/// pre-norm blocks, final layer norm, linear head on the N patch positions.
template <typename T>
class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return *layout_; }
  std::shared_ptr<const ParamLayout> layout_ptr() const { return layout_; }

  ParamSet<T> init_params() const;

  // `patches` row r is the patch at grid index indices[r]. Throws InputError
  // for duplicate or out-of-range indices and wrong patch widths.
  EncodeOutput<T> encode(const ParamSet<T>& p, const Mat<T>& patches,
                         std::span<const int> indices) const;
  EncodeOutput<T> encode_full(const ParamSet<T>& p, const Mat<T>& patches) const;

  // N x dec_dim: projected visible tokens, the mask token at masked slots,
  // plus decoder positions everywhere.
  Mat<T> restore_sequence(const ParamSet<T>& p, const EncodeOutput<T>& visible,
                          const views::MaskSet& mask) const;

  // N x patch_dim predictions in normalized-pixel space.
  Mat<T> decode(const ParamSet<T>& p, const RowVec<T>& bottleneck, const Mat<T>& restored) const;

  // Full forward: encode source, encode visible target, restore, decode.
  Mat<T> predict(const ParamSet<T>& p, const Example<T>& ex) const;

  // Adds scale * dL/dparams into `grads` and returns L. Throws NumericError
  // on a non-finite loss.
  double accumulate_loss_and_grad(const ParamSet<T>& p, const Example<T>& ex, ParamSet<T>& grads,
                                  T scale = T(1), GradRouting routing = {}) const;
  LossGrad<T> loss_and_grad(const ParamSet<T>& p, const Example<T>& ex,
                            GradRouting routing = {}) const;

  const detail::ModelIds& ids() const { return *ids_; }

 private:
  ModelConfig cfg_;
  std::shared_ptr<ParamLayout> layout_;
  std::shared_ptr<const detail::ModelIds> ids_;
  std::vector<int> all_indices_;
  Mat<T> enc_pos_;  // N x enc_dim
  Mat<T> dec_pos_;  // N x dec_dim
};

extern template class Model<float>;
extern template class Model<double>;

// Closed-form parameter count for a configuration.
std::size_t parameter_count(const ModelConfig& cfg);

}  // namespace crobo::nn

#endif  // CROBO_MODEL_HPP
