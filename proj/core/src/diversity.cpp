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

#include "vitdiv/diversity.hpp"

#include "vitdiv/autograd.hpp"
#include "vitdiv/ops.hpp"

namespace vitdiv {

using ad::Tensor;

template <typename T>
std::vector<std::int64_t> argmax_rows(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeError("argmax_rows", logits.shape(), {}, "expected [B, C]");
  const auto b = logits.dim(0), c = logits.dim(1);
  std::vector<std::int64_t> out(static_cast<std::size_t>(b));
  const T* p = logits.data().data();
  for (std::int64_t r = 0; r < b; ++r) {
    std::int64_t best = 0;
    for (std::int64_t k = 1; k < c; ++k) {
      if (p[r * c + k] > p[r * c + best]) best = k;
    }
    out[static_cast<std::size_t>(r)] = best;
  }
  return out;
}

namespace {

template <typename T>
Tensor<T> one_hot(std::span<const std::int64_t> classes, std::int64_t num_classes) {
  const auto b = static_cast<std::int64_t>(classes.size());
  std::vector<T> v(static_cast<std::size_t>(b * num_classes), T(0));
  for (std::int64_t r = 0; r < b; ++r) {
    const auto k = classes[static_cast<std::size_t>(r)];
    if (k < 0 || k >= num_classes) throw ShapeError("one_hot", {num_classes}, {k}, "class out of range");
    v[static_cast<std::size_t>(r * num_classes + k)] = T(1);
  }
  return Tensor<T>({b, num_classes}, std::move(v));
}

}  // namespace

template <typename T>
HeadGradients<T> per_head_input_gradients(const ForwardTrace<T>& trace, std::int64_t layer,
                                          bool differentiable, ScoreKind score) {
  if (layer < 0 || layer >= static_cast<std::int64_t>(trace.blocks.size())) {
    throw ConfigError("regularized_layer", "layer index out of range");
  }
  const BlockTrace<T>& block = trace.blocks[static_cast<std::size_t>(layer)];
  const Tensor<T>& x = block.input;
  if (!x.requires_grad() || !trace.logits.requires_grad()) {
    throw Error("per_head_input_gradients: block input is disconnected from the logits");
  }

  HeadGradients<T> out;
  out.layer = layer;
  out.top_class = argmax_rows(trace.logits);
  const Tensor<T> selector = one_hot<T>(out.top_class, trace.logits.dim(1));
  const Tensor<T> scores =
      score == ScoreKind::kLogit ? trace.logits : ad::softmax(trace.logits);
  // Summing over the batch keeps per-example gradients separate.
  const Tensor<T> top = ad::sum_all(ad::mul(scores, selector));

  ad::GradOptions options;
  options.create_graph = differentiable;
  options.allow_unused = false;

  const auto& mhsa = block.mhsa;
  const auto heads = static_cast<std::int64_t>(mhsa.heads.size());
  const auto d = x.dim(2);

  const auto full_and_concat = ad::grad(top, {x, mhsa.concat}, options);
  out.full = full_and_concat[0];
  const Tensor<T>& concat_cotangent = full_and_concat[1];

  for (std::int64_t i = 0; i < heads; ++i) {
    const Tensor<T>& h = mhsa.heads[static_cast<std::size_t>(i)];
    if (!h.requires_grad()) {
      // Pruned head: a constant zero block contributes nothing.
      out.per_head.push_back(Tensor<T>::zeros(x.shape()));
      continue;
    }
    const Tensor<T> cotangent =
        heads == 1 ? concat_cotangent : ad::slice(concat_cotangent, -1, i * d, d);
    out.per_head.push_back(ad::vjp<T>({h}, {cotangent}, {x}, options)[0]);
  }
  return out;
}

template <typename T>
HeadGradients<T> per_head_input_gradients(const VisionTransformer<T>& model,
                                          const Tensor<T>& images, bool differentiable,
                                          ScoreKind score) {
  ad::GradModeGuard grad_on(true);
  ForwardOptions options;
  options.differentiable_inputs = true;
  const ForwardTrace<T> trace = model.forward(images, options);
  return per_head_input_gradients(trace, model.config().regularized_layer, differentiable, score);
}

template <typename T>
DiversityLossBreakdown<T> diversity_loss(const HeadGradients<T>& grads, T epsilon) {
  if (grads.per_head.empty()) throw Error("diversity_loss: no head gradients");
  if (!(epsilon > T(0))) throw ConfigError("epsilon", "must be positive");
  const auto& first = grads.per_head.front();
  if (first.rank() != 3) throw ShapeError("diversity_loss", first.shape(), {}, "expected [B, N, D]");
  for (const auto& g : grads.per_head) {
    if (g.shape() != first.shape()) throw ShapeError("diversity_loss", first.shape(), g.shape());
  }
  const auto batch = first.dim(0);
  const auto d = first.dim(2);

  std::vector<Tensor<T>> unit;
  for (const auto& g : grads.per_head) {
    const Tensor<T> norm = ad::add_scalar(ad::sqrt(ad::sum_axis(ad::square(g), -1)), epsilon);
    unit.push_back(ad::div(g, ad::broadcast_axis(norm, -1, d)));
  }

  DiversityLossBreakdown<T> out;
  out.epsilon = epsilon;
  const auto heads = static_cast<std::int64_t>(unit.size());
  std::vector<Tensor<T>> upper;  // pair (i, j), i < j
  for (std::int64_t i = 0; i < heads; ++i) {
    for (std::int64_t j = i + 1; j < heads; ++j) {
      const Tensor<T> c = ad::sum_axis(ad::mul(unit[static_cast<std::size_t>(i)],
                                               unit[static_cast<std::size_t>(j)]),
                                       -1);          // [B, N]
      upper.push_back(ad::mean_axis(ad::square(c), -1));  // [B]
    }
  }
  // c is symmetric in (i, j), so both orders share the same value.
  std::size_t k = 0;
  std::vector<std::vector<Tensor<T>>> table(static_cast<std::size_t>(heads),
                                            std::vector<Tensor<T>>(static_cast<std::size_t>(heads)));
  for (std::int64_t i = 0; i < heads; ++i)
    for (std::int64_t j = i + 1; j < heads; ++j) {
      table[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = upper[k];
      table[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = upper[k];
      ++k;
    }
  Tensor<T> per_example;
  for (std::int64_t i = 0; i < heads; ++i)
    for (std::int64_t j = 0; j < heads; ++j) {
      if (i == j) continue;
      const Tensor<T>& v = table[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      out.per_pair.push_back({i, j, v});
      per_example = per_example.defined() ? ad::add(per_example, v) : v;
    }
  if (!per_example.defined()) per_example = Tensor<T>::zeros({batch});
  out.per_example = per_example;
  out.total = ad::mean_all(per_example);
  return out;
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::uint8_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != static_cast<std::int64_t>(labels.size())) {
    throw ShapeError("cross_entropy", logits.shape(), {static_cast<std::int64_t>(labels.size())},
                     "one label per row");
  }
  std::vector<std::int64_t> classes(labels.begin(), labels.end());
  const Tensor<T> selector = one_hot<T>(classes, logits.dim(1));
  const Tensor<T> picked = ad::sum_axis(ad::mul(ad::log_softmax(logits), selector), -1);
  return ad::neg(ad::mean_all(picked));
}

template <typename T>
Tensor<T> total_loss(const Tensor<T>& logits, std::span<const std::uint8_t> labels,
                     const HeadGradients<T>* grads, T lambda, T epsilon) {
  if (lambda < T(0)) throw ConfigError("lambda", "must be >= 0");
  Tensor<T> loss = cross_entropy(logits, labels);
  if (lambda == T(0)) return loss;
  if (!grads) throw Error("total_loss: lambda > 0 needs head gradients");
  return ad::add(loss, ad::scale(diversity_loss(*grads, epsilon).total, lambda));
}

#define VITDIV_INSTANTIATE_DIVERSITY(T)                                                            \
  template std::vector<std::int64_t> argmax_rows(const Tensor<T>&);                               \
  template HeadGradients<T> per_head_input_gradients(const ForwardTrace<T>&, std::int64_t, bool,  \
                                                     ScoreKind);                                  \
  template HeadGradients<T> per_head_input_gradients(const VisionTransformer<T>&,                 \
                                                     const Tensor<T>&, bool, ScoreKind);          \
  template DiversityLossBreakdown<T> diversity_loss(const HeadGradients<T>&, T);                  \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const std::uint8_t>);              \
  template Tensor<T> total_loss(const Tensor<T>&, std::span<const std::uint8_t>,                  \
                                const HeadGradients<T>*, T, T);

VITDIV_INSTANTIATE_DIVERSITY(float)
VITDIV_INSTANTIATE_DIVERSITY(double)

}  // namespace vitdiv
