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

#include "crobo/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "crobo/errors.hpp"
#include "crobo/random.hpp"

namespace crobo::nn {

namespace detail {

struct LinearIds {
  int w = -1;
  int b = -1;
};
struct NormIds {
  int g = -1;
  int b = -1;
};
struct BlockIds {
  NormIds ln1;
  LinearIds qkv;
  LinearIds proj;
  NormIds ln2;
  LinearIds fc1;
  LinearIds fc2;
  int heads = 1;
};

struct ModelIds {
  LinearIds patch_proj;
  int cls_token = -1;
  int cls_pos = -1;
  std::vector<BlockIds> enc_blocks;
  NormIds enc_norm;
  LinearIds dec_embed;
  int mask_token = -1;
  std::vector<BlockIds> dec_blocks;
  NormIds dec_norm;
  LinearIds head;
};

}  // namespace detail

namespace {

using detail::BlockIds;
using detail::LinearIds;
using detail::ModelIds;
using detail::NormIds;

template <typename T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

constexpr double kNormEps = 1e-6;
constexpr double kInitStd = 0.02;

LinearIds add_linear(ParamLayout& l, const std::string& name, int in, int out) {
  return {l.add(name + ".weight", in, out, Init::kTruncNormal, true),
          l.add(name + ".bias", 1, out, Init::kZeros, false)};
}

NormIds add_norm(ParamLayout& l, const std::string& name, int dim) {
  return {l.add(name + ".weight", 1, dim, Init::kOnes, false),
          l.add(name + ".bias", 1, dim, Init::kZeros, false)};
}

BlockIds add_block(ParamLayout& l, const std::string& prefix, int dim, int hidden, int heads) {
  BlockIds b;
  b.ln1 = add_norm(l, prefix + ".norm1", dim);
  b.qkv = add_linear(l, prefix + ".attn.qkv", dim, 3 * dim);
  b.proj = add_linear(l, prefix + ".attn.proj", dim, dim);
  b.ln2 = add_norm(l, prefix + ".norm2", dim);
  b.fc1 = add_linear(l, prefix + ".mlp.fc1", dim, hidden);
  b.fc2 = add_linear(l, prefix + ".mlp.fc2", hidden, dim);
  b.heads = heads;
  return b;
}

// ---------------------------------------------------------------------------
// Layers. Each forward records what its backward needs; each backward adds
// parameter gradients into `g` and returns the input gradient.

template <typename T>
Mat<T> linear(const Mat<T>& x, const ParamSet<T>& p, LinearIds id) {
  Mat<T> y(x.rows(), p.mat(id.w).cols());
  y.noalias() = x * p.mat(id.w);
  y.rowwise() += p.vec(id.b);
  return y;
}

template <typename T>
Mat<T> linear_backward(const Mat<T>& x, const Mat<T>& dy, const ParamSet<T>& p, ParamSet<T>& g,
                       LinearIds id, bool need_dx = true) {
  g.mat(id.w).noalias() += x.transpose() * dy;
  g.vec(id.b) += dy.colwise().sum();
  if (!need_dx) return {};
  Mat<T> dx(dy.rows(), x.cols());
  dx.noalias() = dy * p.mat(id.w).transpose();
  return dx;
}

template <typename T>
struct NormCache {
  Mat<T> xhat;
  ColVec<T> rstd;
};

template <typename T>
Mat<T> layer_norm(const Mat<T>& x, const ParamSet<T>& p, NormIds id, NormCache<T>& c) {
  const auto n = x.rows();
  c.xhat.resize(n, x.cols());
  c.rstd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mu = x.row(i).mean();
    const T var = (x.row(i).array() - mu).square().mean();
    const T r = T(1) / std::sqrt(var + T(kNormEps));
    c.xhat.row(i) = (x.row(i).array() - mu) * r;
    c.rstd(i) = r;
  }
  Mat<T> y = c.xhat.array().rowwise() * p.vec(id.g).array();
  y.rowwise() += p.vec(id.b);
  return y;
}

template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const NormCache<T>& c, const ParamSet<T>& p,
                           ParamSet<T>& g, NormIds id) {
  g.vec(id.g) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  g.vec(id.b) += dy.colwise().sum();
  const Mat<T> dxhat = dy.array().rowwise() * p.vec(id.g).array();
  Mat<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const T m1 = dxhat.row(i).mean();
    const T m2 = (dxhat.row(i).array() * c.xhat.row(i).array()).mean();
    dx.row(i) = c.rstd(i) * (dxhat.row(i).array() - m1 - c.xhat.row(i).array() * m2);
  }
  return dx;
}

template <typename T>
struct AttnCache {
  Mat<T> x;
  Mat<T> qkv;
  std::vector<Mat<T>> probs;
  Mat<T> ctx;
};

template <typename T>
Mat<T> attention(const Mat<T>& x, const ParamSet<T>& p, const BlockIds& b, AttnCache<T>& c) {
  const auto n = x.rows();
  const auto d = x.cols();
  const int heads = b.heads;
  const auto dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  c.x = x;
  c.qkv = linear(x, p, b.qkv);
  c.ctx.resize(n, d);
  c.probs.resize(heads);
  for (int h = 0; h < heads; ++h) {
    const auto q = c.qkv.middleCols(h * dh, dh);
    const auto k = c.qkv.middleCols(d + h * dh, dh);
    const auto v = c.qkv.middleCols(2 * d + h * dh, dh);
    Mat<T>& prob = c.probs[h];
    prob.resize(n, n);
    prob.noalias() = q * k.transpose();
    prob *= scale;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto row = prob.row(i).array();
      row = (row - row.maxCoeff()).exp();
      row /= row.sum();
    }
    c.ctx.middleCols(h * dh, dh).noalias() = prob * v;
  }
  return linear(c.ctx, p, b.proj);
}

template <typename T>
Mat<T> attention_backward(const Mat<T>& dy, const AttnCache<T>& c, const ParamSet<T>& p,
                          ParamSet<T>& g, const BlockIds& b) {
  const auto n = c.x.rows();
  const auto d = c.x.cols();
  const int heads = b.heads;
  const auto dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const Mat<T> dctx = linear_backward(c.ctx, dy, p, g, b.proj);
  Mat<T> dqkv(n, 3 * d);
  Mat<T> dprob(n, n);
  for (int h = 0; h < heads; ++h) {
    const auto q = c.qkv.middleCols(h * dh, dh);
    const auto k = c.qkv.middleCols(d + h * dh, dh);
    const auto v = c.qkv.middleCols(2 * d + h * dh, dh);
    const auto dout = dctx.middleCols(h * dh, dh);
    const Mat<T>& prob = c.probs[h];
    dprob.noalias() = dout * v.transpose();
    dqkv.middleCols(2 * d + h * dh, dh).noalias() = prob.transpose() * dout;
    // Softmax Jacobian, row by row: dS = P * (dP - <dP, P>).
    const ColVec<T> inner = (dprob.array() * prob.array()).rowwise().sum();
    Mat<T> dscore = prob.array() * (dprob.colwise() - inner).array();
    dscore *= scale;
    dqkv.middleCols(h * dh, dh).noalias() = dscore * k;
    dqkv.middleCols(d + h * dh, dh).noalias() = dscore.transpose() * q;
  }
  return linear_backward(c.x, dqkv, p, g, b.qkv);
}

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * T(std::numbers::sqrt2 / 2)));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x * T(std::numbers::sqrt2 / 2)));
  const T pdf = std::exp(T(-0.5) * x * x) * T(std::numbers::inv_sqrtpi / std::numbers::sqrt2);
  return cdf + x * pdf;
}

template <typename T>
struct MlpCache {
  Mat<T> x;
  Mat<T> pre;
  Mat<T> act;
};

template <typename T>
Mat<T> mlp(const Mat<T>& x, const ParamSet<T>& p, const BlockIds& b, MlpCache<T>& c) {
  c.x = x;
  c.pre = linear(x, p, b.fc1);
  c.act = c.pre.unaryExpr([](T v) { return gelu(v); });
  return linear(c.act, p, b.fc2);
}

template <typename T>
Mat<T> mlp_backward(const Mat<T>& dy, const MlpCache<T>& c, const ParamSet<T>& p, ParamSet<T>& g,
                    const BlockIds& b) {
  Mat<T> dact = linear_backward(c.act, dy, p, g, b.fc2);
  dact.array() *= c.pre.unaryExpr([](T v) { return gelu_grad(v); }).array();
  return linear_backward(c.x, dact, p, g, b.fc1);
}

template <typename T>
struct BlockCache {
  NormCache<T> n1;
  AttnCache<T> attn;
  NormCache<T> n2;
  MlpCache<T> mlp;
};

template <typename T>
Mat<T> block_forward(const Mat<T>& x, const ParamSet<T>& p, const BlockIds& b, BlockCache<T>& c) {
  Mat<T> x1 = x + attention(layer_norm(x, p, b.ln1, c.n1), p, b, c.attn);
  return x1 + mlp(layer_norm(x1, p, b.ln2, c.n2), p, b, c.mlp);
}

template <typename T>
Mat<T> block_backward(const Mat<T>& dy, const BlockCache<T>& c, const ParamSet<T>& p,
                      ParamSet<T>& g, const BlockIds& b) {
  Mat<T> dx1 = dy + layer_norm_backward(mlp_backward(dy, c.mlp, p, g, b), c.n2, p, g, b.ln2);
  return dx1 + layer_norm_backward(attention_backward(dx1, c.attn, p, g, b), c.n1, p, g, b.ln1);
}

// ---------------------------------------------------------------------------
// Encoder / decoder stacks.

template <typename T>
struct EncoderCache {
  Mat<T> patches;
  std::vector<BlockCache<T>> blocks;
  NormCache<T> norm;
};

template <typename T>
Mat<T> encoder_forward(const ModelIds& ids, const Mat<T>& pos, const ParamSet<T>& p,
                       const Mat<T>& patches, std::span<const int> indices, EncoderCache<T>& c) {
  const auto n = static_cast<Eigen::Index>(indices.size());
  Mat<T> x(n + 1, p.mat(ids.cls_token).cols());
  x.row(0) = p.vec(ids.cls_token) + p.vec(ids.cls_pos);
  if (n > 0) {
    x.bottomRows(n) = linear(patches, p, ids.patch_proj);
    for (Eigen::Index r = 0; r < n; ++r) x.row(r + 1) += pos.row(indices[r]);
  }
  c.patches = patches;
  c.blocks.resize(ids.enc_blocks.size());
  for (std::size_t i = 0; i < ids.enc_blocks.size(); ++i)
    x = block_forward(x, p, ids.enc_blocks[i], c.blocks[i]);
  return layer_norm(x, p, ids.enc_norm, c.norm);
}

template <typename T>
void encoder_backward(const ModelIds& ids, const Mat<T>& dout, const EncoderCache<T>& c,
                      const ParamSet<T>& p, ParamSet<T>& g) {
  Mat<T> dx = layer_norm_backward(dout, c.norm, p, g, ids.enc_norm);
  for (std::size_t i = ids.enc_blocks.size(); i-- > 0;)
    dx = block_backward(dx, c.blocks[i], p, g, ids.enc_blocks[i]);
  g.vec(ids.cls_token) += dx.row(0);
  g.vec(ids.cls_pos) += dx.row(0);
  const auto n = dx.rows() - 1;
  if (n > 0) linear_backward<T>(c.patches, dx.bottomRows(n), p, g, ids.patch_proj, false);
}

template <typename T>
struct DecoderCache {
  Mat<T> bottleneck;  // 1 x enc_dim
  Mat<T> visible_tokens;
  std::vector<BlockCache<T>> blocks;
  NormCache<T> norm;
  Mat<T> normed_patches;  // N x dec_dim, head input
};

// visible_tokens row r belongs to grid index mask.visible[r].
template <typename T>
Mat<T> restore(const ModelIds& ids, const Mat<T>& pos, const ParamSet<T>& p,
               const Mat<T>& visible_tokens, const views::MaskSet& mask) {
  Mat<T> seq(mask.n, p.vec(ids.mask_token).size());
  if (!mask.visible.empty()) {
    const Mat<T> proj = linear(visible_tokens, p, ids.dec_embed);
    for (std::size_t r = 0; r < mask.visible.size(); ++r) seq.row(mask.visible[r]) = proj.row(r);
  }
  for (int i : mask.masked) seq.row(i) = p.vec(ids.mask_token);
  seq += pos;
  return seq;
}

template <typename T>
Mat<T> decoder_forward(const ModelIds& ids, const ParamSet<T>& p, const Mat<T>& bottleneck,
                       const Mat<T>& restored, DecoderCache<T>& c) {
  const auto n = restored.rows();
  Mat<T> x(n + 1, restored.cols());
  x.row(0) = linear(bottleneck, p, ids.dec_embed);
  x.bottomRows(n) = restored;
  c.bottleneck = bottleneck;
  c.blocks.resize(ids.dec_blocks.size());
  for (std::size_t i = 0; i < ids.dec_blocks.size(); ++i)
    x = block_forward(x, p, ids.dec_blocks[i], c.blocks[i]);
  const Mat<T> normed = layer_norm(x, p, ids.dec_norm, c.norm);
  c.normed_patches = normed.bottomRows(n);
  return linear(c.normed_patches, p, ids.head);
}

// Returns d(bottleneck) and writes d(visible tokens) into dvisible.
template <typename T>
Mat<T> decoder_backward(const ModelIds& ids, const Mat<T>& dpred, const DecoderCache<T>& c,
                        const views::MaskSet& mask, const ParamSet<T>& p, ParamSet<T>& g,
                        Mat<T>& dvisible) {
  const auto n = dpred.rows();
  Mat<T> dnormed = Mat<T>::Zero(n + 1, c.normed_patches.cols());
  dnormed.bottomRows(n) = linear_backward(c.normed_patches, dpred, p, g, ids.head);
  Mat<T> dx = layer_norm_backward(dnormed, c.norm, p, g, ids.dec_norm);
  for (std::size_t i = ids.dec_blocks.size(); i-- > 0;)
    dx = block_backward(dx, c.blocks[i], p, g, ids.dec_blocks[i]);

  for (int i : mask.masked) g.vec(ids.mask_token) += dx.row(i + 1);
  if (!mask.visible.empty()) {
    Mat<T> dproj(mask.visible.size(), dx.cols());
    for (std::size_t r = 0; r < mask.visible.size(); ++r) dproj.row(r) = dx.row(mask.visible[r] + 1);
    dvisible = linear_backward(c.visible_tokens, dproj, p, g, ids.dec_embed);
  }
  const Mat<T> dz_proj = dx.topRows(1);
  return linear_backward(c.bottleneck, dz_proj, p, g, ids.dec_embed);
}

void check_indices(std::span<const int> indices, int n) {
  std::vector<char> seen(n, 0);
  for (int i : indices) {
    if (i < 0 || i >= n) throw InputError("patch index " + std::to_string(i) + " out of range");
    if (seen[i]) throw InputError("duplicate patch index " + std::to_string(i));
    seen[i] = 1;
  }
}

template <typename T>
Mat<T> gather_rows(const Mat<T>& m, const std::vector<int>& rows) {
  Mat<T> out(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(r) = m.row(rows[r]);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

int ModelConfig::enc_hidden() const { return static_cast<int>(std::lround(mlp_ratio * enc_dim)); }
int ModelConfig::dec_hidden() const { return static_cast<int>(std::lround(mlp_ratio * dec_dim)); }

void ModelConfig::validate() const {
  auto check_stack = [&](int dim, int depth, int heads, const char* which) {
    if (dim <= 0 || depth <= 0 || heads <= 0)
      throw ConfigError(std::string(which) + " dims, depth and heads must be positive");
    if (dim % heads != 0)
      throw ConfigError(std::string(which) + " embed dim must be divisible by the head count");
    if (dim % 4 != 0)
      throw ConfigError(std::string(which) + " embed dim must be divisible by 4 (2D sin-cos table)");
    if (std::abs(mlp_ratio * dim - std::round(mlp_ratio * dim)) > 1e-9 || mlp_ratio <= 0)
      throw ConfigError(std::string(which) + " mlp_ratio * dim must be a positive integer");
  };
  check_stack(enc_dim, enc_depth, enc_heads, "encoder");
  check_stack(dec_dim, dec_depth, dec_heads, "decoder");
  if (patch_size <= 0 || grid_side <= 0) throw ConfigError("patch_size and grid_side must be positive");
}

std::size_t parameter_count(const ModelConfig& c) {
  auto block = [&](std::size_t d, std::size_t hidden) {
    return 2 * d + (d * 3 * d + 3 * d) + (d * d + d) + 2 * d + (d * hidden + hidden) + (hidden * d + d);
  };
  const std::size_t e = c.enc_dim, d = c.dec_dim, pd = c.patch_dim();
  return (pd * e + e) + 2 * e + c.enc_depth * block(e, c.enc_hidden()) + 2 * e + (e * d + d) + d +
         c.dec_depth * block(d, c.dec_hidden()) + 2 * d + (d * pd + pd);
}

Mat<double> sincos_2d_table(int dim, int grid_side) {
  if (dim % 4 != 0) throw ConfigError("sin-cos table needs dim divisible by 4");
  const int quarter = dim / 4;
  Mat<double> table(grid_side * grid_side, dim);
  for (int r = 0; r < grid_side; ++r)
    for (int c = 0; c < grid_side; ++c) {
      auto row = table.row(r * grid_side + c);
      for (int k = 0; k < quarter; ++k) {
        const double omega = 1.0 / std::pow(10000.0, static_cast<double>(k) / quarter);
        row(k) = std::sin(c * omega);
        row(quarter + k) = std::cos(c * omega);
        row(2 * quarter + k) = std::sin(r * omega);
        row(3 * quarter + k) = std::cos(r * omega);
      }
    }
  return table;
}

template <typename T>
RowVec<T> EncodeOutput<T>::token(int index) const {
  for (std::size_t r = 0; r < indices.size(); ++r)
    if (indices[r] == index) return tokens.row(r);
  throw InputError("no token for patch index " + std::to_string(index));
}

Example<float> make_example(const views::ViewPair& pair, const views::MaskSet& mask, int patch_size) {
  Example<float> ex;
  ex.source = views::patchify(pair.source, patch_size).patches;
  const views::PatchGrid target = views::patchify(pair.target, patch_size);
  ex.target = target.patches;
  ex.targets = views::normalize_targets(target).normalized;
  if (mask.n != target.count()) throw InputError("mask size does not match the patch grid");
  ex.mask = mask;
  return ex;
}

template <typename T>
MseResult masked_mse(const Mat<T>& pred, const Mat<T>& target, const views::MaskSet& mask) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() || pred.rows() != mask.n)
    throw InputError("masked_mse: shape mismatch");
  if (mask.masked.empty()) return {0.0, true};
  double sum = 0.0;
  for (int i : mask.masked) sum += static_cast<double>((pred.row(i) - target.row(i)).squaredNorm());
  return {sum / static_cast<double>(mask.masked.size()), false};
}

template MseResult masked_mse<float>(const Mat<float>&, const Mat<float>&, const views::MaskSet&);
template MseResult masked_mse<double>(const Mat<double>&, const Mat<double>&, const views::MaskSet&);

template <typename T>
Model<T>::Model(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  auto layout = std::make_shared<ParamLayout>();
  auto ids = std::make_shared<ModelIds>();
  const int e = cfg_.enc_dim, d = cfg_.dec_dim;
  ids->patch_proj = add_linear(*layout, "enc.patch_proj", cfg_.patch_dim(), e);
  ids->cls_token = layout->add("enc.cls_token", 1, e, Init::kNormal, false);
  ids->cls_pos = layout->add("enc.cls_pos", 1, e, Init::kZeros, false);
  for (int i = 0; i < cfg_.enc_depth; ++i)
    ids->enc_blocks.push_back(
        add_block(*layout, "enc.blocks." + std::to_string(i), e, cfg_.enc_hidden(), cfg_.enc_heads));
  ids->enc_norm = add_norm(*layout, "enc.norm", e);
  ids->dec_embed = add_linear(*layout, "dec.embed", e, d);
  ids->mask_token = layout->add("dec.mask_token", 1, d, Init::kNormal, false);
  for (int i = 0; i < cfg_.dec_depth; ++i)
    ids->dec_blocks.push_back(
        add_block(*layout, "dec.blocks." + std::to_string(i), d, cfg_.dec_hidden(), cfg_.dec_heads));
  ids->dec_norm = add_norm(*layout, "dec.norm", d);
  ids->head = add_linear(*layout, "dec.head", d, cfg_.patch_dim());
  layout_ = std::move(layout);
  ids_ = std::move(ids);
  enc_pos_ = sincos_2d_table(e, cfg_.grid_side).cast<T>();
  dec_pos_ = sincos_2d_table(d, cfg_.grid_side).cast<T>();
  all_indices_.resize(cfg_.num_patches());
  std::iota(all_indices_.begin(), all_indices_.end(), 0);
}

template <typename T>
ParamSet<T> Model<T>::init_params() const {
  ParamSet<T> p(layout_);
  Rng rng(derive_seed(cfg_.seed, "init"));
  for (std::size_t i = 0; i < layout_->tensors().size(); ++i) {
    const TensorInfo& t = (*layout_)[static_cast<int>(i)];
    T* data = p.flat().data() + t.offset;
    for (std::size_t k = 0; k < t.size(); ++k) {
      switch (t.init) {
        case Init::kTruncNormal:
          data[k] = static_cast<T>(rng.truncated_normal(kInitStd));
          break;
        case Init::kNormal:
          data[k] = static_cast<T>(rng.normal(0.0, kInitStd));
          break;
        case Init::kZeros:
          data[k] = T(0);
          break;
        case Init::kOnes:
          data[k] = T(1);
          break;
      }
    }
  }
  return p;
}

template <typename T>
EncodeOutput<T> Model<T>::encode(const ParamSet<T>& p, const Mat<T>& patches,
                                 std::span<const int> indices) const {
  if (patches.rows() != static_cast<Eigen::Index>(indices.size()))
    throw InputError("encode: one patch row per index required");
  if (!indices.empty() && patches.cols() != cfg_.patch_dim())
    throw InputError("encode: patch vectors must have length P*P*3");
  check_indices(indices, cfg_.num_patches());
  EncoderCache<T> cache;
  const Mat<T> out = encoder_forward(*ids_, enc_pos_, p, patches, indices, cache);
  EncodeOutput<T> result;
  result.cls = out.row(0);
  result.indices.assign(indices.begin(), indices.end());
  result.tokens = out.bottomRows(out.rows() - 1);
  return result;
}

template <typename T>
EncodeOutput<T> Model<T>::encode_full(const ParamSet<T>& p, const Mat<T>& patches) const {
  return encode(p, patches, all_indices_);
}

template <typename T>
Mat<T> Model<T>::restore_sequence(const ParamSet<T>& p, const EncodeOutput<T>& visible,
                                  const views::MaskSet& mask) const {
  if (mask.n != cfg_.num_patches()) throw InputError("restore_sequence: mask size mismatch");
  if (visible.indices.size() != mask.visible.size())
    throw InputError("restore_sequence: visible tokens do not match the mask");
  Mat<T> ordered(mask.visible.size(), cfg_.enc_dim);
  for (std::size_t r = 0; r < mask.visible.size(); ++r) ordered.row(r) = visible.token(mask.visible[r]);
  return restore(*ids_, dec_pos_, p, ordered, mask);
}

template <typename T>
Mat<T> Model<T>::decode(const ParamSet<T>& p, const RowVec<T>& bottleneck, const Mat<T>& restored) const {
  if (bottleneck.size() != cfg_.enc_dim) throw InputError("decode: bottleneck dimension mismatch");
  if (restored.rows() != cfg_.num_patches() || restored.cols() != cfg_.dec_dim)
    throw InputError("decode: restored sequence must be N x dec_dim");
  DecoderCache<T> cache;
  return decoder_forward(*ids_, p, Mat<T>(bottleneck), restored, cache);
}

template <typename T>
Mat<T> Model<T>::predict(const ParamSet<T>& p, const Example<T>& ex) const {
  const EncodeOutput<T> src = encode_full(p, ex.source);
  const EncodeOutput<T> tgt = encode(p, gather_rows(ex.target, ex.mask.visible), ex.mask.visible);
  return decode(p, src.cls, restore_sequence(p, tgt, ex.mask));
}

template <typename T>
double Model<T>::accumulate_loss_and_grad(const ParamSet<T>& p, const Example<T>& ex,
                                          ParamSet<T>& grads, T scale, GradRouting routing) const {
  const views::MaskSet& mask = ex.mask;
  if (mask.n != cfg_.num_patches() || ex.source.rows() != mask.n || ex.target.rows() != mask.n ||
      ex.targets.rows() != mask.n || ex.source.cols() != cfg_.patch_dim())
    throw InputError("loss_and_grad: example does not match the model configuration");

  EncoderCache<T> src_cache, tgt_cache;
  DecoderCache<T> dec_cache;
  const Mat<T> src_out = encoder_forward(*ids_, enc_pos_, p, ex.source, all_indices_, src_cache);
  const Mat<T> tgt_out = encoder_forward(*ids_, enc_pos_, p, gather_rows(ex.target, mask.visible),
                                         std::span<const int>(mask.visible), tgt_cache);
  const auto nv = static_cast<Eigen::Index>(mask.visible.size());
  dec_cache.visible_tokens = tgt_out.bottomRows(nv);
  const Mat<T> restored = restore(*ids_, dec_pos_, p, dec_cache.visible_tokens, mask);
  const Mat<T> pred = decoder_forward(*ids_, p, Mat<T>(src_out.topRows(1)), restored, dec_cache);

  const MseResult mse = masked_mse(pred, ex.targets, mask);
  if (!std::isfinite(mse.loss)) {
    std::ostringstream msg;
    msg << "non-finite loss " << mse.loss << " (|M|=" << mask.masked.size()
        << ", max |pred|=" << pred.cwiseAbs().maxCoeff()
        << ", max |param|=" << Eigen::Map<const ColVec<T>>(p.flat().data(), p.flat().size()).cwiseAbs().maxCoeff()
        << ")";
    throw NumericError(msg.str());
  }
  if (mse.empty_mask) return 0.0;

  Mat<T> dpred = Mat<T>::Zero(pred.rows(), pred.cols());
  const T coef = scale * T(2) / static_cast<T>(mask.masked.size());
  for (int i : mask.masked) dpred.row(i) = coef * (pred.row(i) - ex.targets.row(i));

  Mat<T> dvisible;
  const Mat<T> dz = decoder_backward(*ids_, dpred, dec_cache, mask, p, grads, dvisible);
  if (routing.source) {
    Mat<T> dsrc = Mat<T>::Zero(src_out.rows(), src_out.cols());
    dsrc.row(0) = dz.row(0);
    encoder_backward(*ids_, dsrc, src_cache, p, grads);
  }
  if (routing.target && nv > 0) {
    Mat<T> dtgt = Mat<T>::Zero(nv + 1, tgt_out.cols());
    dtgt.bottomRows(nv) = dvisible;
    encoder_backward(*ids_, dtgt, tgt_cache, p, grads);
  }
  return mse.loss;
}

template <typename T>
LossGrad<T> Model<T>::loss_and_grad(const ParamSet<T>& p, const Example<T>& ex,
                                    GradRouting routing) const {
  LossGrad<T> out{0.0, ParamSet<T>(layout_)};
  out.loss = accumulate_loss_and_grad(p, ex, out.grads, T(1), routing);
  return out;
}

template struct EncodeOutput<float>;
template struct EncodeOutput<double>;
template class Model<float>;
template class Model<double>;

}  // namespace crobo::nn
