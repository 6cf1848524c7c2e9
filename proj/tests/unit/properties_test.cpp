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

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "vitdiv/autograd.hpp"
#include "vitdiv/checkpoint.hpp"
#include "vitdiv/diversity.hpp"
#include "vitdiv/ops.hpp"

// Randomized invariants. Each property runs over a fixed set of seeds so a
// failure reproduces exactly.

namespace vitdiv {
namespace {

using ad::Tensor;
using testing::random_tensor;

constexpr std::uint64_t kTrials = 25;

ModelConfig random_config(CounterRng& rng) {
  ModelConfig c;
  c.patch_size = 2;
  c.image_height = 2 * static_cast<std::int64_t>(1 + rng.below(3));
  c.image_width = 2 * static_cast<std::int64_t>(1 + rng.below(3));
  c.channels = static_cast<std::int64_t>(1 + rng.below(2));
  c.dim = static_cast<std::int64_t>(2 + rng.below(4));
  c.heads = static_cast<std::int64_t>(1 + rng.below(5));
  c.qkv_bias = rng.below(2) == 1;
  c.mlp_hidden = static_cast<std::int64_t>(rng.below(2) * (1 + rng.below(4)));
  c.num_classes = static_cast<std::int64_t>(2 + rng.below(2));
  return c;
}

Tensor<double> images_for(const ModelConfig& c, std::int64_t batch, std::uint64_t seed) {
  return random_tensor<double>({batch, c.image_height, c.image_width, c.channels}, seed, 0, 1);
}

HeadGradients<double> wrap(std::vector<Tensor<double>> per_head) {
  HeadGradients<double> g;
  g.full = Tensor<double>::zeros(per_head[0].shape());
  g.per_head = std::move(per_head);
  return g;
}

TEST(Property, DiversityBoundsAndInvariances) {
  for (std::uint64_t t = 0; t < kTrials; ++t) {
    CounterRng rng(t, 1);
    const auto h = static_cast<std::int64_t>(1 + rng.below(5));
    const auto n = static_cast<std::int64_t>(1 + rng.below(6));
    const auto d = static_cast<std::int64_t>(1 + rng.below(6));
    std::vector<Tensor<double>> g;
    for (std::int64_t i = 0; i < h; ++i) g.push_back(random_tensor<double>({2, n, d}, t, -1, 1, 10 + i));
    const double base = diversity_loss(wrap(g)).total.item();
    EXPECT_GE(base, 0.0);
    EXPECT_LE(base, static_cast<double>(h * (h - 1)) + 1e-12);
    // Rescaling one token row of one head (any sign) leaves the penalty unchanged.
    auto scaled = g;
    auto& target = scaled[rng.below(static_cast<std::uint64_t>(h))];
    target = target.clone();
    const auto row = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(2 * n)));
    const double s = (rng.below(2) ? -1.0 : 1.0) * rng.uniform(0.1, 10.0);
    for (std::int64_t k = 0; k < d; ++k) target.mutable_data()[row * d + k] *= s;
    EXPECT_NEAR(diversity_loss(wrap(scaled)).total.item(), base, 1e-4) << "trial " << t;
  }
}

TEST(Property, HeadDecompositionHoldsWheneverTokensOnlyEnterThroughHeads) {
  for (std::uint64_t t = 0; t < kTrials; ++t) {
    CounterRng rng(t, 2);
    auto c = random_config(rng);
    VisionTransformer<double> model(c, t);
    const auto g = per_head_input_gradients(model, images_for(c, 2, t), false,
                                            rng.below(2) ? ScoreKind::kLogit : ScoreKind::kProbability);
    testing::Matrix sum(g.full.data().size(), 0.0);
    for (const auto& h : g.per_head)
      for (std::size_t e = 0; e < sum.size(); ++e) sum[e] += h.data()[e];
    EXPECT_LT(testing::max_abs_diff(sum, testing::to_matrix(g.full)),
              1e-10 * std::max(1.0, testing::max_abs(testing::to_matrix(g.full))))
        << "trial " << t;
  }
}

TEST(Property, ForwardMatchesReference) {
  for (std::uint64_t t = 0; t < kTrials; ++t) {
    CounterRng rng(t, 3);
    auto c = random_config(rng);
    c.use_residual = rng.below(2) == 1;
    c.layers = static_cast<std::int64_t>(1 + rng.below(2));
    VisionTransformer<double> model(c, t);
    const auto x = images_for(c, 1, t + 1);
    const auto ref = testing::ref_logits(testing::param_table(model), c, x.data().data());
    EXPECT_LT(testing::max_abs_diff(testing::to_matrix(model.logits(x)), ref), 1e-10) << "trial " << t;
  }
}

TEST(Property, SingleHeadMaskEqualsExtractedModel) {
  for (std::uint64_t t = 0; t < kTrials; ++t) {
    CounterRng rng(t, 4);
    auto c = random_config(rng);
    c.use_residual = rng.below(2) == 1;
    VisionTransformer<double> model(c, t);
    const auto head = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(c.heads)));
    const auto x = images_for(c, 3, t + 2);
    const auto masked = model.logits(x, single_head_masks(c, 0, head));
    const auto single = extract_head(model, head).logits(x);
    EXPECT_LT(testing::max_abs_diff(testing::to_matrix(masked), testing::to_matrix(single)), 1e-10)
        << "trial " << t;
  }
}

TEST(Property, VjpIsLinearInTheCotangent) {
  for (std::uint64_t t = 0; t < kTrials; ++t) {
    auto x = random_tensor<double>({3, 4}, t);
    x.set_requires_grad(true);
    const auto w = random_tensor<double>({4, 5}, t + 1);
    const auto y = ad::softmax(ad::matmul(ad::tanh(x), w));
    const auto c1 = random_tensor<double>({3, 5}, t + 2), c2 = random_tensor<double>({3, 5}, t + 3);
    const auto g1 = ad::vjp<double>({y}, {c1}, {x})[0];
    const auto g2 = ad::vjp<double>({y}, {c2}, {x})[0];
    const auto g12 = ad::vjp<double>({y}, {ad::add(ad::scale(c1, 2.0), ad::scale(c2, -3.0))}, {x})[0];
    for (std::int64_t e = 0; e < x.numel(); ++e) {
      EXPECT_NEAR(g12.data()[e], 2.0 * g1.data()[e] - 3.0 * g2.data()[e], 1e-12);
    }
  }
}

TEST(Property, SoftmaxShiftInvarianceAndTransposeProduct) {
  for (std::uint64_t t = 0; t < kTrials; ++t) {
    const auto a = random_tensor<double>({4, 6}, t, -3, 3);
    const auto s1 = testing::to_matrix(ad::softmax(a));
    const auto s2 = testing::to_matrix(ad::softmax(ad::add_scalar(a, 17.0)));
    EXPECT_LT(testing::max_abs_diff(s1, s2), 1e-14);
    for (int r = 0; r < 4; ++r) {
      double z = 0;
      for (int k = 0; k < 6; ++k) z += s1[r * 6 + k];
      EXPECT_NEAR(z, 1.0, 1e-14);
    }
    const auto b = random_tensor<double>({6, 3}, t + 1);
    const auto lhs = ad::transpose(ad::matmul(a, b));
    const auto rhs = ad::matmul(ad::transpose(b), ad::transpose(a));
    EXPECT_LT(testing::max_abs_diff(testing::to_matrix(lhs), testing::to_matrix(rhs)), 1e-12);
  }
}

TEST(Property, CheckpointRoundTripRandomConfigs) {
  const auto dir = testing::scratch_dir("prop_ckpt");
  for (std::uint64_t t = 0; t < kTrials; ++t) {
    CounterRng rng(t, 5);
    const auto c = random_config(rng);
    VisionTransformer<float> model(c, t);
    save_checkpoint(dir / "m.ckpt", model);
    const auto back = load_checkpoint<float>(dir / "m.ckpt");
    EXPECT_EQ(back.config(), c);
    EXPECT_EQ(testing::param_table(back), testing::param_table(model)) << "trial " << t;
  }
}

TEST(Property, RngStreamsAreIndependentAndUniform) {
  CounterRng a(1, 0), b(1, 1);
  int same = 0;
  double mean = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto u = a.uniform();
    same += u == b.uniform();
    mean += u / 10000;
  }
  EXPECT_EQ(same, 0);
  EXPECT_NEAR(mean, 0.5, 0.02);
  CounterRng c(1, 0);
  CounterRng d(1, 0);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(c.next_u64(), d.next_u64());
}

}  // namespace
}  // namespace vitdiv
