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

// Hand-set model for the synthetic collages (16x8 images, 4x4 patches) whose
// heads read known features. Attention is uniform (zero query/key maps). The
// patch embedding has two detectors: channel 0 responds to the diagonal
// texture of the bottom half (the label) and channel 1 to the stripe
// orientation of the top half (the spurious attribute); each is blind to the
// other half's pattern. Head `robust_head` copies channel 0 into its output,
// every other head copies channel 1, and the classifier reads the sum.

#include "vitdiv/model.hpp"

namespace vitdiv::testing {

inline ModelConfig planted_config(std::int64_t heads) {
  ModelConfig c;
  c.image_height = 16;
  c.image_width = 8;
  c.channels = 1;
  c.patch_size = 4;
  c.dim = 4;
  c.heads = heads;
  return c;
}

template <typename T>
VisionTransformer<T> planted_model(std::int64_t heads, std::int64_t robust_head) {
  const auto c = planted_config(heads);
  VisionTransformer<T> model(c, 0);
  const auto d = c.dim;
  const auto pd = c.patch_dim();
  std::vector<T> embed(static_cast<std::size_t>(pd * d), T(0));
  for (std::int64_t y = 0; y < 4; ++y)
    for (std::int64_t x = 0; x < 4; ++x) {
      const double diag1 = ((x - y + 64) % 4) < 2 ? 1.0 : -1.0;
      const double diag0 = ((x + y) % 4) < 2 ? 1.0 : -1.0;
      const double vertical = (x % 2 == 0) ? 1.0 : -1.0;
      const double horizontal = (y % 2 == 0) ? 1.0 : -1.0;
      const auto row = (y * 4 + x) * d;
      embed[static_cast<std::size_t>(row + 0)] = static_cast<T>(diag1 - diag0);
      embed[static_cast<std::size_t>(row + 1)] = static_cast<T>(vertical - horizontal);
    }
  model.set_parameter("patch.weight", ad::Tensor<T>({pd, d}, embed));
  model.set_parameter("patch.bias", ad::Tensor<T>::zeros({d}));
  model.set_parameter("pos", ad::Tensor<T>::zeros({c.tokens(), d}));
  std::vector<T> wo(static_cast<std::size_t>(heads * d * d), T(0));
  for (std::int64_t i = 0; i < heads; ++i) {
    const std::string prefix = "blocks.0.attn.head." + std::to_string(i) + ".";
    model.set_parameter(prefix + "wq", ad::Tensor<T>::zeros({d, d}));
    model.set_parameter(prefix + "wk", ad::Tensor<T>::zeros({d, d}));
    std::vector<T> wv(static_cast<std::size_t>(d * d), T(0));
    wv[static_cast<std::size_t>((i == robust_head ? 0 : 1) * d + 0)] = T(1);
    model.set_parameter(prefix + "wv", ad::Tensor<T>({d, d}, wv));
    wo[static_cast<std::size_t>((i * d + 0) * d + 0)] = T(1);
  }
  model.set_parameter("blocks.0.attn.out.weight", ad::Tensor<T>({heads * d, d}, wo));
  model.set_parameter("blocks.0.attn.out.bias", ad::Tensor<T>::zeros({d}));
  std::vector<T> head(static_cast<std::size_t>(d * 2), T(0));
  head[0] = T(-1);
  head[1] = T(1);
  model.set_parameter("head.weight", ad::Tensor<T>({d, 2}, head));
  model.set_parameter("head.bias", ad::Tensor<T>::zeros({2}));
  return model;
}

}  // namespace vitdiv::testing
