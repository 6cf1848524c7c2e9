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
#include <optional>
#include <span>
#include <vector>

#include "vitdiv/datasets.hpp"
#include "vitdiv/diversity.hpp"
#include "vitdiv/model.hpp"

namespace vitdiv {

enum class Target { kLabel, kSpurious };

/// Argmax predictions over a whole split, computed without a graph.
template <typename T>
std::vector<std::int64_t> predict(const VisionTransformer<T>& model, const data::DatasetSplit& split,
                                  std::span<const PruneMask> masks = {}, std::size_t batch_size = 256);

/// Fraction of examples whose prediction equals the target field.
double accuracy(std::span<const std::int64_t> predictions, const data::DatasetSplit& split, Target target);

template <typename T>
double evaluate(const VisionTransformer<T>& model, const data::DatasetSplit& split,
                std::span<const PruneMask> masks = {}, Target target = Target::kLabel);

struct HeadChoice {
  std::int64_t head = 0;
  double accuracy = 0.0;
  std::vector<double> per_head;  // ood-val accuracy of every single-head mask
};

/// Keeps one head at a time in the regularized layer and picks the best on
/// the given split; ties go to the lowest index.
template <typename T>
HeadChoice oracle_select_head(const VisionTransformer<T>& model, const data::DatasetSplit& ood_val);

struct HeadProfile {
  std::int64_t head = 0;
  double robust_acc = 0.0;
  double spurious_acc = 0.0;

  double gap() const { return robust_acc > spurious_acc ? robust_acc - spurious_acc : spurious_acc - robust_acc; }
};

inline constexpr double kSpecializationThreshold = 0.20;

/// Label and spurious-attribute accuracy of each single-head mask. The split
/// must have correlation 0.5.
template <typename T>
std::vector<HeadProfile> profile_heads(const VisionTransformer<T>& model, const data::DatasetSplit& probe);

/// Heads whose robust and spurious accuracies differ by more than `threshold`.
std::int64_t count_specialized(std::span<const HeadProfile> profile,
                               double threshold = kSpecializationThreshold);

/// Batch-mean diversity penalty over a split at the regularized layer.
template <typename T>
double mean_diversity(const VisionTransformer<T>& model, const data::DatasetSplit& split,
                      std::size_t batch_size = 128, double epsilon = kDefaultDiversityEpsilon,
                      ScoreKind score = ScoreKind::kLogit);

}  // namespace vitdiv
