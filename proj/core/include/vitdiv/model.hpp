// Copyright 2026 The vitdiv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vitdiv/tensor.hpp"

namespace vitdiv {

/// Architecture hyperparameters. Every head has its own D x D query, key and
/// value maps, and the output projection maps the H*D concatenation to D.
struct ModelConfig {
  std::int64_t image_height = 16;
  std::int64_t image_width = 8;
  std::int64_t channels = 1;
  std::int64_t patch_size = 4;
  std::int64_t dim = 16;
  std::int64_t heads = 4;
  std::int64_t layers = 1;
  std::int64_t mlp_hidden = 0;  // 0 disables the per-block MLP
  bool use_residual = false;
  bool qkv_bias = false;
  std::int64_t num_classes = 2;
  std::int64_t regularized_layer = 0;

  std::int64_t grid_rows() const { return image_height / patch_size; }
  std::int64_t grid_cols() const { return image_width / patch_size; }
  std::int64_t tokens() const { return grid_rows() * grid_cols(); }
  std::int64_t patch_dim() const { return patch_size * patch_size * channels; }

  /// Throws ConfigError naming the offending field.
  void validate() const;

  std::map<std::string, std::string> to_map() const;
  static ModelConfig from_map(const std::map<std::string, std::string>& values);

  bool operator==(const ModelConfig&) const = default;
};

/// Keep/drop flags over the heads of one attention block. Kept heads are
/// scaled by heads / kept so the concatenation stays in range.
class PruneMask {
 public:
  explicit PruneMask(std::vector<bool> keep);

  static PruneMask all(std::int64_t heads);
  static PruneMask single(std::int64_t heads, std::int64_t head);

  std::int64_t heads() const { return static_cast<std::int64_t>(keep_.size()); }
  std::int64_t kept() const;
  bool keeps(std::int64_t head) const { return keep_.at(static_cast<std::size_t>(head)); }
  bool all_kept() const { return kept() == heads(); }
  double rescale() const { return static_cast<double>(heads()) / static_cast<double>(kept()); }

 private:
  std::vector<bool> keep_;
};

template <typename T>
struct AttentionParams {
  std::vector<ad::Tensor<T>> wq, wk, wv;  // H tensors, each [D, D]
  std::vector<ad::Tensor<T>> bq, bk, bv;  // empty unless qkv_bias
  ad::Tensor<T> wo;                       // [H*D, D]
  ad::Tensor<T> bo;                       // [D]
};

template <typename T>
struct BlockParams {
  AttentionParams<T> attn;
  // Present only when mlp_hidden > 0.
  ad::Tensor<T> ln_gamma, ln_beta;
  ad::Tensor<T> fc1_w, fc1_b, fc2_w, fc2_b;
};

template <typename T>
struct MhsaOutput {
  ad::Tensor<T> y;                       // [B, N, D]
  std::vector<ad::Tensor<T>> heads;      // h_i after masking/rescaling, [B, N, D]
  std::vector<ad::Tensor<T>> attention;  // softmax weights, [B, N, N]
  ad::Tensor<T> concat;                  // [B, N, H*D]
};

/// Multi-head self-attention over x [B, N, D]. A null mask keeps every head
/// unscaled. Throws if the mask prunes every head.
template <typename T>
MhsaOutput<T> mhsa_forward(const ad::Tensor<T>& x, const AttentionParams<T>& params,
                           const PruneMask* mask = nullptr);

template <typename T>
struct BlockTrace {
  ad::Tensor<T> input;  // tokens entering the attention block
  MhsaOutput<T> mhsa;
  ad::Tensor<T> output;
};

template <typename T>
struct ForwardTrace {
  ad::Tensor<T> tokens;
  std::vector<BlockTrace<T>> blocks;
  ad::Tensor<T> pooled;
  ad::Tensor<T> logits;  // [B, num_classes]
};

struct ForwardOptions {
  /// Empty: no masking. Otherwise one mask per block.
  std::span<const PruneMask> masks;
  /// Promote every block input that would not require grad to a fresh leaf
  /// that does, so input gradients exist without parameter gradients.
  bool differentiable_inputs = false;
};

template <typename T>
class VisionTransformer {
 public:
  /// Random initialization: uniform(+-1/sqrt(fan_in)) weights, zero biases,
  /// uniform(+-0.02) positional table.
  VisionTransformer(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  /// images [B, H, W, C] -> flattened patches [B, N, p*p*C]; patch rows are
  /// ordered row-major over the grid, each patch as (row, col, channel).
  ad::Tensor<T> patchify(const ad::Tensor<T>& images) const;
  /// Patch projection plus positional table: [B, N, D].
  ad::Tensor<T> embed(const ad::Tensor<T>& images) const;

  ForwardTrace<T> forward(const ad::Tensor<T>& images, const ForwardOptions& options = {}) const;
  ad::Tensor<T> logits(const ad::Tensor<T>& images, std::span<const PruneMask> masks = {}) const;

  /// Stable-ordered handles onto every parameter (shared storage).
  std::vector<std::pair<std::string, ad::Tensor<T>>> named_parameters() const;
  std::vector<ad::Tensor<T>> parameters() const;
  /// Replaces a parameter by name; the shape must match.
  void set_parameter(const std::string& name, ad::Tensor<T> value);
  void set_requires_grad(bool requires_grad);
  std::int64_t parameter_count() const;

  ad::Tensor<T> patch_weight() const { return patch_w_; }
  ad::Tensor<T> patch_bias() const { return patch_b_; }
  ad::Tensor<T> positional() const { return pos_; }
  const BlockParams<T>& block(std::int64_t layer) const {
    return blocks_.at(static_cast<std::size_t>(layer));
  }
  ad::Tensor<T> head_weight() const { return head_w_; }
  ad::Tensor<T> head_bias() const { return head_b_; }

  /// Deep copy at another precision.
  template <typename U>
  VisionTransformer<U> cast() const {
    VisionTransformer<U> out(config_, 0);
    for (const auto& [name, tensor] : named_parameters()) {
      out.set_parameter(name, ad::cast<U>(tensor));
    }
    return out;
  }

  VisionTransformer clone() const { return cast<T>(); }

 private:
  ad::Tensor<T> run_block(std::int64_t layer, const ad::Tensor<T>& x, const PruneMask* mask,
                          BlockTrace<T>* trace) const;
  std::vector<std::pair<std::string, ad::Tensor<T>*>> parameter_slots();

  ModelConfig config_;
  ad::Tensor<T> patch_w_, patch_b_, pos_;
  std::vector<BlockParams<T>> blocks_;
  ad::Tensor<T> head_w_, head_b_;
};

/// Masks for every block: all heads kept except in `layer`, which keeps only `head`.
std::vector<PruneMask> single_head_masks(const ModelConfig& config, std::int64_t layer,
                                         std::int64_t head);

/// One-head model equivalent to keeping only `head` of a single-block model:
/// that head's query/key/value maps, and its W_o row block multiplied by H.
template <typename T>
VisionTransformer<T> extract_head(const VisionTransformer<T>& model, std::int64_t head);

extern template class VisionTransformer<float>;
extern template class VisionTransformer<double>;

}  // namespace vitdiv
