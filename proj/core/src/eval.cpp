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

#include "vitdiv/eval.hpp"

#include <algorithm>
#include <numeric>

#include "vitdiv/error.hpp"

namespace vitdiv {

namespace {

std::vector<std::size_t> range_indices(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return idx;
}

}  // namespace

template <typename T>
std::vector<std::int64_t> predict(const VisionTransformer<T>& model, const data::DatasetSplit& split,
                                  std::span<const PruneMask> masks, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch_size", "must be >= 1");
  ad::NoGradGuard no_grad;
  std::vector<std::int64_t> out;
  out.reserve(split.size());
  for (std::size_t begin = 0; begin < split.size(); begin += batch_size) {
    const auto idx = range_indices(begin, std::min(split.size(), begin + batch_size));
    const auto logits = model.logits(split.images<T>(idx), masks);
    const auto pred = argmax_rows(logits);
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

double accuracy(std::span<const std::int64_t> predictions, const data::DatasetSplit& split, Target target) {
  if (predictions.size() != split.size()) throw Error("accuracy: prediction count differs from split size");
  if (split.size() == 0) throw Error("accuracy: empty split");
  const auto& truth = target == Target::kLabel ? split.labels : split.spurious;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) correct += predictions[i] == truth[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

template <typename T>
double evaluate(const VisionTransformer<T>& model, const data::DatasetSplit& split,
                std::span<const PruneMask> masks, Target target) {
  return accuracy(predict(model, split, masks), split, target);
}

template <typename T>
HeadChoice oracle_select_head(const VisionTransformer<T>& model, const data::DatasetSplit& ood_val) {
  const auto& cfg = model.config();
  HeadChoice choice;
  choice.accuracy = -1.0;
  for (std::int64_t h = 0; h < cfg.heads; ++h) {
    const auto masks = single_head_masks(cfg, cfg.regularized_layer, h);
    const double acc = evaluate(model, ood_val, masks, Target::kLabel);
    choice.per_head.push_back(acc);
    if (acc > choice.accuracy) {
      choice.accuracy = acc;
      choice.head = h;
    }
  }
  return choice;
}

template <typename T>
std::vector<HeadProfile> profile_heads(const VisionTransformer<T>& model, const data::DatasetSplit& probe) {
  if (probe.correlation != 0.5) {
    throw ConfigError("probe", "profile_heads needs a split with correlation 0.5, got " +
                                   std::to_string(probe.correlation));
  }
  const auto& cfg = model.config();
  std::vector<HeadProfile> out;
  for (std::int64_t h = 0; h < cfg.heads; ++h) {
    const auto masks = single_head_masks(cfg, cfg.regularized_layer, h);
    const auto pred = predict(model, probe, masks);
    out.push_back({h, accuracy(pred, probe, Target::kLabel), accuracy(pred, probe, Target::kSpurious)});
  }
  return out;
}

std::int64_t count_specialized(std::span<const HeadProfile> profile, double threshold) {
  return std::count_if(profile.begin(), profile.end(),
                       [threshold](const HeadProfile& p) { return p.gap() > threshold; });
}

template <typename T>
double mean_diversity(const VisionTransformer<T>& model, const data::DatasetSplit& split,
                      std::size_t batch_size, double epsilon, ScoreKind score) {
  if (split.size() == 0) throw Error("mean_diversity: empty split");
  if (batch_size == 0) throw ConfigError("batch_size", "must be >= 1");
  ad::GradModeGuard grad_on(true);
  auto frozen = model.clone();
  frozen.set_requires_grad(false);
  double sum = 0.0;
  for (std::size_t begin = 0; begin < split.size(); begin += batch_size) {
    const auto idx = range_indices(begin, std::min(split.size(), begin + batch_size));
    const auto grads = per_head_input_gradients(frozen, split.images<T>(idx), false, score);
    const auto loss = diversity_loss(grads, static_cast<T>(epsilon));
    for (T v : loss.per_example.data()) sum += static_cast<double>(v);
  }
  return sum / static_cast<double>(split.size());
}

#define VITDIV_INSTANTIATE_EVAL(T)                                                                   \
  template std::vector<std::int64_t> predict(const VisionTransformer<T>&, const data::DatasetSplit&, \
                                             std::span<const PruneMask>, std::size_t);               \
  template double evaluate(const VisionTransformer<T>&, const data::DatasetSplit&,                   \
                           std::span<const PruneMask>, Target);                                      \
  template HeadChoice oracle_select_head(const VisionTransformer<T>&, const data::DatasetSplit&);     \
  template std::vector<HeadProfile> profile_heads(const VisionTransformer<T>&,                       \
                                                  const data::DatasetSplit&);                        \
  template double mean_diversity(const VisionTransformer<T>&, const data::DatasetSplit&, std::size_t, \
                                 double, ScoreKind);

VITDIV_INSTANTIATE_EVAL(float)
VITDIV_INSTANTIATE_EVAL(double)

}  // namespace vitdiv
