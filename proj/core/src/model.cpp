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

#include "vitdiv/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vitdiv/ops.hpp"
#include "vitdiv/rng.hpp"

namespace vitdiv {

using ad::Shape;
using ad::Tensor;

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
  auto positive = [](const char* field, std::int64_t v) {
    if (v < 1) throw ConfigError(field, "must be >= 1 (got " + std::to_string(v) + ")");
  };
  positive("image_height", image_height);
  positive("image_width", image_width);
  positive("channels", channels);
  positive("patch_size", patch_size);
  positive("dim", dim);
  positive("heads", heads);
  positive("layers", layers);
  positive("num_classes", num_classes);
  if (image_height % patch_size != 0) {
    throw ConfigError("patch_size", "image_height " + std::to_string(image_height) +
                                        " is not divisible by " + std::to_string(patch_size));
  }
  if (image_width % patch_size != 0) {
    throw ConfigError("patch_size", "image_width " + std::to_string(image_width) +
                                        " is not divisible by " + std::to_string(patch_size));
  }
  if (mlp_hidden < 0) throw ConfigError("mlp_hidden", "must be >= 0");
  if (regularized_layer < 0 || regularized_layer >= layers) {
    throw ConfigError("regularized_layer", "must lie in [0, layers)");
  }
}

std::map<std::string, std::string> ModelConfig::to_map() const {
  return {
      {"image_height", std::to_string(image_height)},
      {"image_width", std::to_string(image_width)},
      {"channels", std::to_string(channels)},
      {"patch_size", std::to_string(patch_size)},
      {"dim", std::to_string(dim)},
      {"heads", std::to_string(heads)},
      {"layers", std::to_string(layers)},
      {"mlp_hidden", std::to_string(mlp_hidden)},
      {"use_residual", use_residual ? "true" : "false"},
      {"qkv_bias", qkv_bias ? "true" : "false"},
      {"num_classes", std::to_string(num_classes)},
      {"regularized_layer", std::to_string(regularized_layer)},
  };
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& values) {
  ModelConfig c;
  auto get_int = [&](const char* key, std::int64_t& field) {
    auto it = values.find(key);
    if (it == values.end()) return;
    try {
      std::size_t used = 0;
      field = std::stoll(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError(key, "expected an integer, got '" + it->second + "'");
    }
  };
  auto get_bool = [&](const char* key, bool& field) {
    auto it = values.find(key);
    if (it == values.end()) return;
    if (it->second == "true" || it->second == "1") field = true;
    else if (it->second == "false" || it->second == "0") field = false;
    else throw ConfigError(key, "expected true/false, got '" + it->second + "'");
  };
  get_int("image_height", c.image_height);
  get_int("image_width", c.image_width);
  get_int("channels", c.channels);
  get_int("patch_size", c.patch_size);
  get_int("dim", c.dim);
  get_int("heads", c.heads);
  get_int("layers", c.layers);
  get_int("mlp_hidden", c.mlp_hidden);
  get_bool("use_residual", c.use_residual);
  get_bool("qkv_bias", c.qkv_bias);
  get_int("num_classes", c.num_classes);
  get_int("regularized_layer", c.regularized_layer);
  return c;
}

// ---------------------------------------------------------------------------
// PruneMask

PruneMask::PruneMask(std::vector<bool> keep) : keep_(std::move(keep)) {
  if (keep_.empty()) throw ConfigError("mask", "a mask needs at least one head");
  if (kept() == 0) throw ConfigError("mask", "every head is pruned; keep at least one");
}

PruneMask PruneMask::all(std::int64_t heads) {
  return PruneMask(std::vector<bool>(static_cast<std::size_t>(heads), true));
}

PruneMask PruneMask::single(std::int64_t heads, std::int64_t head) {
  if (head < 0 || head >= heads) throw ConfigError("mask", "head index out of range");
  std::vector<bool> keep(static_cast<std::size_t>(heads), false);
  keep[static_cast<std::size_t>(head)] = true;
  return PruneMask(std::move(keep));
}

std::int64_t PruneMask::kept() const {
  return static_cast<std::int64_t>(std::count(keep_.begin(), keep_.end(), true));
}

std::vector<PruneMask> single_head_masks(const ModelConfig& config, std::int64_t layer,
                                         std::int64_t head) {
  std::vector<PruneMask> masks;
  for (std::int64_t l = 0; l < config.layers; ++l) {
    masks.push_back(l == layer ? PruneMask::single(config.heads, head)
                               : PruneMask::all(config.heads));
  }
  return masks;
}

// ---------------------------------------------------------------------------
// Attention

template <typename T>
MhsaOutput<T> mhsa_forward(const Tensor<T>& x, const AttentionParams<T>& params,
                           const PruneMask* mask) {
  const auto heads = static_cast<std::int64_t>(params.wq.size());
  if (x.rank() != 3) throw ShapeError("mhsa_forward", x.shape(), {}, "x must be [B, N, D]");
  const auto d = x.dim(2);
  if (mask && mask->heads() != heads) {
    throw ShapeError("mhsa_forward", {heads}, {mask->heads()}, "mask head count");
  }
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(d));
  const bool rescaling = mask && !mask->all_kept();
  const T rescale = mask ? static_cast<T>(mask->rescale()) : T(1);
  const bool biased = !params.bq.empty();

  MhsaOutput<T> out;
  for (std::int64_t i = 0; i < heads; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (mask && !mask->keeps(i)) {
      out.heads.push_back(Tensor<T>::zeros(x.shape()));
      out.attention.push_back(Tensor<T>{});
      continue;
    }
    Tensor<T> q = ad::matmul(x, params.wq[idx]);
    Tensor<T> k = ad::matmul(x, params.wk[idx]);
    Tensor<T> v = ad::matmul(x, params.wv[idx]);
    if (biased) {
      q = ad::add_bias(q, params.bq[idx]);
      k = ad::add_bias(k, params.bk[idx]);
      v = ad::add_bias(v, params.bv[idx]);
    }
    const Tensor<T> scores = ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt_d);
    const Tensor<T> weights = ad::softmax(scores);
    Tensor<T> h = ad::matmul(weights, v);
    if (rescaling) h = ad::scale(h, rescale);
    out.heads.push_back(std::move(h));
    out.attention.push_back(weights);
  }
  out.concat = heads == 1 ? out.heads[0] : ad::concat(out.heads, -1);
  out.y = ad::add_bias(ad::matmul(out.concat, params.wo), params.bo);
  return out;
}

// ---------------------------------------------------------------------------
// VisionTransformer

namespace {

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, std::uint64_t seed, std::uint64_t stream) {
  CounterRng rng(seed, stream);
  std::vector<T> values(static_cast<std::size_t>(ad::numel(shape)));
  for (auto& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>(std::move(shape), std::move(values));
}

}  // namespace

template <typename T>
VisionTransformer<T>::VisionTransformer(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.validate();
  const auto d = config_.dim;
  const auto h = config_.heads;
  std::uint64_t stream = 0;
  auto weight = [&](Shape shape, std::int64_t fan_in) {
    return uniform_tensor<T>(std::move(shape), 1.0 / std::sqrt(static_cast<double>(fan_in)), seed,
                             stream++);
  };
  patch_w_ = weight({config_.patch_dim(), d}, config_.patch_dim());
  patch_b_ = Tensor<T>::zeros({d});
  pos_ = uniform_tensor<T>({config_.tokens(), d}, 0.02, seed, stream++);
  for (std::int64_t l = 0; l < config_.layers; ++l) {
    BlockParams<T> block;
    for (std::int64_t i = 0; i < h; ++i) {
      block.attn.wq.push_back(weight({d, d}, d));
      block.attn.wk.push_back(weight({d, d}, d));
      block.attn.wv.push_back(weight({d, d}, d));
      if (config_.qkv_bias) {
        block.attn.bq.push_back(Tensor<T>::zeros({d}));
        block.attn.bk.push_back(Tensor<T>::zeros({d}));
        block.attn.bv.push_back(Tensor<T>::zeros({d}));
      }
    }
    block.attn.wo = weight({h * d, d}, h * d);
    block.attn.bo = Tensor<T>::zeros({d});
    if (config_.mlp_hidden > 0) {
      block.ln_gamma = Tensor<T>::full({d}, T(1));
      block.ln_beta = Tensor<T>::zeros({d});
      block.fc1_w = weight({d, config_.mlp_hidden}, d);
      block.fc1_b = Tensor<T>::zeros({config_.mlp_hidden});
      block.fc2_w = weight({config_.mlp_hidden, d}, config_.mlp_hidden);
      block.fc2_b = Tensor<T>::zeros({d});
    }
    blocks_.push_back(std::move(block));
  }
  head_w_ = weight({d, config_.num_classes}, d);
  head_b_ = Tensor<T>::zeros({config_.num_classes});
}

template <typename T>
Tensor<T> VisionTransformer<T>::patchify(const Tensor<T>& images) const {
  const auto& c = config_;
  if (images.rank() != 4 || images.dim(1) != c.image_height || images.dim(2) != c.image_width ||
      images.dim(3) != c.channels) {
    throw ShapeError("patchify", images.shape(),
                     {-1, c.image_height, c.image_width, c.channels}, "image dims do not match config");
  }
  const auto batch = images.dim(0);
  const auto p = c.patch_size;
  const auto n = c.tokens();
  const auto pd = c.patch_dim();
  // Each patch row is p*C contiguous values; gather them in patch order.
  const auto segments = c.image_width / p;
  std::vector<std::int64_t> rows;
  rows.reserve(static_cast<std::size_t>(batch * n * p));
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::int64_t gr = 0; gr < c.grid_rows(); ++gr)
      for (std::int64_t gc = 0; gc < c.grid_cols(); ++gc)
        for (std::int64_t py = 0; py < p; ++py) rows.push_back((b * c.image_height + gr * p + py) * segments + gc);
  const Tensor<T> table = ad::reshape(images, {batch * c.image_height * segments, p * c.channels});
  return ad::reshape(ad::gather_rows(table, rows), {batch, n, pd});
}

template <typename T>
Tensor<T> VisionTransformer<T>::embed(const Tensor<T>& images) const {
  const Tensor<T> patches = patchify(images);
  const Tensor<T> projected = ad::add_bias(ad::matmul(patches, patch_w_), patch_b_);
  return ad::add(projected, ad::expand_leading(pos_, {images.dim(0)}));
}

template <typename T>
Tensor<T> VisionTransformer<T>::run_block(std::int64_t layer, const Tensor<T>& x,
                                          const PruneMask* mask, BlockTrace<T>* trace) const {
  const auto& block = blocks_.at(static_cast<std::size_t>(layer));
  MhsaOutput<T> mhsa = mhsa_forward(x, block.attn, mask);
  Tensor<T> y = mhsa.y;
  if (config_.use_residual) y = ad::add(x, y);
  if (config_.mlp_hidden > 0) {
    const Tensor<T> normed = ad::layer_norm(y, block.ln_gamma, block.ln_beta);
    const Tensor<T> hidden = ad::gelu(ad::add_bias(ad::matmul(normed, block.fc1_w), block.fc1_b));
    const Tensor<T> mlp = ad::add_bias(ad::matmul(hidden, block.fc2_w), block.fc2_b);
    y = config_.use_residual ? ad::add(y, mlp) : mlp;
  }
  if (trace) {
    trace->input = x;
    trace->mhsa = std::move(mhsa);
    trace->output = y;
  }
  return y;
}

template <typename T>
ForwardTrace<T> VisionTransformer<T>::forward(const Tensor<T>& images,
                                              const ForwardOptions& options) const {
  if (!options.masks.empty() && static_cast<std::int64_t>(options.masks.size()) != config_.layers) {
    throw ShapeError("forward", {config_.layers}, {static_cast<std::int64_t>(options.masks.size())},
                     "need one mask per block");
  }
  ForwardTrace<T> trace;
  trace.tokens = embed(images);
  Tensor<T> x = trace.tokens;
  trace.blocks.resize(static_cast<std::size_t>(config_.layers));
  for (std::int64_t l = 0; l < config_.layers; ++l) {
    if (options.differentiable_inputs && !x.requires_grad()) {
      x = x.detach();
      x.set_requires_grad(true);
    }
    const PruneMask* mask = options.masks.empty() ? nullptr : &options.masks[static_cast<std::size_t>(l)];
    x = run_block(l, x, mask, &trace.blocks[static_cast<std::size_t>(l)]);
  }
  trace.pooled = ad::mean_axis(x, 1);
  trace.logits = ad::add_bias(ad::matmul(trace.pooled, head_w_), head_b_);
  return trace;
}

template <typename T>
Tensor<T> VisionTransformer<T>::logits(const Tensor<T>& images, std::span<const PruneMask> masks) const {
  ForwardOptions options;
  options.masks = masks;
  return forward(images, options).logits;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> VisionTransformer<T>::parameter_slots() {
  std::vector<std::pair<std::string, Tensor<T>*>> slots;
  slots.emplace_back("patch.weight", &patch_w_);
  slots.emplace_back("patch.bias", &patch_b_);
  slots.emplace_back("pos", &pos_);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    auto& b = blocks_[l];
    const std::string prefix = "blocks." + std::to_string(l) + ".";
    for (std::size_t i = 0; i < b.attn.wq.size(); ++i) {
      const std::string head = prefix + "attn.head." + std::to_string(i) + ".";
      slots.emplace_back(head + "wq", &b.attn.wq[i]);
      slots.emplace_back(head + "wk", &b.attn.wk[i]);
      slots.emplace_back(head + "wv", &b.attn.wv[i]);
      if (!b.attn.bq.empty()) {
        slots.emplace_back(head + "bq", &b.attn.bq[i]);
        slots.emplace_back(head + "bk", &b.attn.bk[i]);
        slots.emplace_back(head + "bv", &b.attn.bv[i]);
      }
    }
    slots.emplace_back(prefix + "attn.out.weight", &b.attn.wo);
    slots.emplace_back(prefix + "attn.out.bias", &b.attn.bo);
    if (b.fc1_w.defined()) {
      slots.emplace_back(prefix + "ln.gamma", &b.ln_gamma);
      slots.emplace_back(prefix + "ln.beta", &b.ln_beta);
      slots.emplace_back(prefix + "mlp.fc1.weight", &b.fc1_w);
      slots.emplace_back(prefix + "mlp.fc1.bias", &b.fc1_b);
      slots.emplace_back(prefix + "mlp.fc2.weight", &b.fc2_w);
      slots.emplace_back(prefix + "mlp.fc2.bias", &b.fc2_b);
    }
  }
  slots.emplace_back("head.weight", &head_w_);
  slots.emplace_back("head.bias", &head_b_);
  return slots;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> VisionTransformer<T>::named_parameters() const {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  for (auto& [name, slot] : const_cast<VisionTransformer*>(this)->parameter_slots()) {
    out.emplace_back(name, *slot);
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> VisionTransformer<T>::parameters() const {
  std::vector<Tensor<T>> out;
  for (auto& [name, tensor] : named_parameters()) out.push_back(tensor);
  return out;
}

template <typename T>
void VisionTransformer<T>::set_parameter(const std::string& name, Tensor<T> value) {
  for (auto& [slot_name, slot] : parameter_slots()) {
    if (slot_name != name) continue;
    if (slot->shape() != value.shape()) throw ShapeError("set_parameter " + name, slot->shape(), value.shape());
    *slot = std::move(value);
    return;
  }
  throw Error("set_parameter: unknown parameter '" + name + "'");
}

template <typename T>
void VisionTransformer<T>::set_requires_grad(bool requires_grad) {
  for (auto& [name, slot] : parameter_slots()) slot->set_requires_grad(requires_grad);
}

template <typename T>
std::int64_t VisionTransformer<T>::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& [name, tensor] : named_parameters()) total += tensor.numel();
  return total;
}

template <typename T>
VisionTransformer<T> extract_head(const VisionTransformer<T>& model, std::int64_t head) {
  const ModelConfig& src = model.config();
  if (src.layers != 1) throw ConfigError("layers", "extract_head needs a single-block model");
  if (head < 0 || head >= src.heads) throw ConfigError("head", "head index out of range");
  ModelConfig cfg = src;
  cfg.heads = 1;
  VisionTransformer<T> out(cfg, 0);
  const std::string h = std::to_string(head);
  const auto d = src.dim;
  for (const auto& [name, tensor] : model.named_parameters()) {
    const std::string prefix = "blocks.0.attn.head.";
    if (name.rfind(prefix, 0) == 0) {
      const auto rest = name.substr(prefix.size());
      const auto dot = rest.find('.');
      if (rest.substr(0, dot) == h) out.set_parameter(prefix + "0" + rest.substr(dot), tensor.clone());
      continue;
    }
    if (name == "blocks.0.attn.out.weight") {
      const Tensor<T> rows = ad::slice(tensor.detach(), 0, head * d, d);
      out.set_parameter(name, ad::scale(rows, static_cast<T>(src.heads)));
      continue;
    }
    out.set_parameter(name, tensor.clone());
  }
  return out;
}

template class VisionTransformer<float>;
template class VisionTransformer<double>;
template MhsaOutput<float> mhsa_forward(const Tensor<float>&, const AttentionParams<float>&,
                                        const PruneMask*);
template MhsaOutput<double> mhsa_forward(const Tensor<double>&, const AttentionParams<double>&,
                                         const PruneMask*);
template VisionTransformer<float> extract_head(const VisionTransformer<float>&, std::int64_t);
template VisionTransformer<double> extract_head(const VisionTransformer<double>&, std::int64_t);

}  // namespace vitdiv
