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
#include <span>
#include <vector>

#include "vitdiv/model.hpp"
#include "vitdiv/tensor.hpp"

namespace vitdiv {

/// Which scalar the input gradients are taken of.
enum class ScoreKind {
  kLogit,        // top pre-softmax logit (default)
  kProbability,  // top softmax probability
};

/// Input gradients at one block for a batch. Every tensor is [B, N, D]; row b
/// belongs to example b (examples do not interact, so one batched backward of
/// the summed scores yields per-example gradients).
template <typename T>
struct HeadGradients {
  std::vector<ad::Tensor<T>> per_head;  // gradient through head i only
  ad::Tensor<T> full;                   // gradient through the whole block
  std::int64_t layer = 0;
  std::vector<std::int64_t> top_class;  // argmax per example, ties -> lowest
};

/// Per-head input gradients of the top predicted score, taken at the input of
/// block `layer` of an already computed trace. The trace must have been built
/// with grad mode on and a block input that requires grad.
///
/// The cotangent of the head concatenation is computed once; head i's slice
/// is then pulled back through h_i alone. With `differentiable` the results
/// stay attached to the graph for second-order use.
template <typename T>
HeadGradients<T> per_head_input_gradients(const ForwardTrace<T>& trace, std::int64_t layer,
                                          bool differentiable,
                                          ScoreKind score = ScoreKind::kLogit);

/// Convenience overload: runs the forward pass itself.
template <typename T>
HeadGradients<T> per_head_input_gradients(const VisionTransformer<T>& model,
                                          const ad::Tensor<T>& images, bool differentiable,
                                          ScoreKind score = ScoreKind::kLogit);

template <typename T>
struct PairTerm {
  std::int64_t i = 0;
  std::int64_t j = 0;
  ad::Tensor<T> value;  // [B]: mean over tokens of c^2 for this ordered pair
};

template <typename T>
struct DiversityLossBreakdown {
  ad::Tensor<T> per_example;     // [B]: sum over ordered pairs
  ad::Tensor<T> total;           // {}: batch mean of per_example
  std::vector<PairTerm<T>> per_pair;
  T epsilon = T(1e-8);
};

inline constexpr double kDefaultDiversityEpsilon = 1e-8;

/// Orthogonality penalty over per-head input gradients. Each token row is
/// normalized over channels (norm + epsilon); c is the dot product of the
/// normalized rows of two heads; each example scores
/// (1/N) * sum over ordered pairs i != j, tokens n of c^2.
template <typename T>
DiversityLossBreakdown<T> diversity_loss(const HeadGradients<T>& grads,
                                         T epsilon = T(kDefaultDiversityEpsilon));

/// Mean cross-entropy of logits [B, C] against integer labels.
template <typename T>
ad::Tensor<T> cross_entropy(const ad::Tensor<T>& logits, std::span<const std::uint8_t> labels);

/// Cross-entropy plus lambda times the batch-mean diversity penalty. With
/// lambda == 0 the gradients are not consulted and may be null.
template <typename T>
ad::Tensor<T> total_loss(const ad::Tensor<T>& logits, std::span<const std::uint8_t> labels,
                         const HeadGradients<T>* grads, T lambda,
                         T epsilon = T(kDefaultDiversityEpsilon));

/// Index of the largest value in each row of [B, C]; ties go to the lowest index.
template <typename T>
std::vector<std::int64_t> argmax_rows(const ad::Tensor<T>& logits);

}  // namespace vitdiv
