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
#include <limits>

#include "oracles.hpp"
#include "planted.hpp"
#include "vitdiv/checkpoint.hpp"
#include "vitdiv/error.hpp"
#include "vitdiv/eval.hpp"
#include "vitdiv/optim.hpp"
#include "vitdiv/train.hpp"

namespace vitdiv {
namespace {

using ad::Tensor;

data::SplitMap small_synthetic(double rho = 0.9, std::uint64_t seed = 0, std::size_t train = 400) {
  data::SyntheticSpec spec;
  spec.counts = {train, 100, 100, 200, 100, 400};
  return data::build_synthetic_spurious(spec, rho, seed);
}

TEST(Adam, MatchesHandComputedSteps) {
  Tensor<double> p({2}, {1.0, -2.0});
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  Adam<double> opt({p}, cfg);
  const std::vector<double> g1 = {0.5, -4.0}, g2 = {1.0, 2.0};
  std::vector<double> m(2, 0), v(2, 0), expect = {1.0, -2.0};
  for (int t = 1; t <= 2; ++t) {
    const auto& g = t == 1 ? g1 : g2;
    ASSERT_TRUE(opt.step({Tensor<double>({2}, g)}));
    for (int i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
      expect[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      EXPECT_NEAR(p.data()[i], expect[i], 1e-12);
    }
  }
  EXPECT_EQ(opt.steps(), 2);
}

TEST(Adam, SkipsNonFiniteGradients) {
  Tensor<float> p({2}, {1.0f, 1.0f});
  Adam<float> opt({p}, {});
  EXPECT_FALSE(opt.step({Tensor<float>({2}, {1.0f, std::numeric_limits<float>::infinity()})}));
  EXPECT_EQ(p.data()[0], 1.0f);
  EXPECT_EQ(opt.skipped(), 1);
  EXPECT_EQ(opt.steps(), 0);
}

TEST(Adam, ValidatesConfig) {
  AdamConfig c;
  c.beta1 = 1.0;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "beta1");
  }
  c = {};
  c.learning_rate = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

ModelConfig synth_model(std::int64_t heads = 4) {
  auto c = testing::planted_config(heads);
  c.dim = 8;
  return c;
}

TEST(Train, ErmReducesLossAndRecordsHistory) {
  const auto splits = small_synthetic();
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 3e-3;
  const auto result = train(VisionTransformer<float>(synth_model(), 1), splits, cfg);
  const auto& h = result.history;
  EXPECT_EQ(h.steps, 3 * 7);  // 400 / 64 rounded up
  EXPECT_EQ(h.records.size(), 3u);
  EXPECT_LT(h.final_train_loss, h.initial_train_loss);
  EXPECT_FALSE(h.has_div);
  EXPECT_FALSE(h.records[0].l_div.has_value());
  EXPECT_GT(h.records.back().id_val_acc, 0.85);
  const auto csv = h.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,l_erm,id_val_acc,ood_val_acc");
  EXPECT_FALSE(result.model.parameters()[0].requires_grad());
}

TEST(Train, DiversityRunRecordsPenaltyAndIsDeterministic) {
  const auto splits = small_synthetic();
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.lambda = 1.0;
  cfg.eval_every = 3;
  const auto a = train(VisionTransformer<float>(synth_model(), 2), splits, cfg);
  const auto b = train(VisionTransformer<float>(synth_model(), 2), splits, cfg);
  EXPECT_TRUE(a.history.has_div);
  EXPECT_EQ(a.history.records.size(), 3u);  // steps 3, 6 and the final partial window
  ASSERT_TRUE(a.history.records[0].l_div.has_value());
  EXPECT_GE(*a.history.records[0].l_div, 0.0);
  EXPECT_EQ(testing::param_table(a.model), testing::param_table(b.model));
  EXPECT_EQ(a.history.to_csv(), b.history.to_csv());
  const auto csv = a.history.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,l_erm,l_div,id_val_acc,ood_val_acc");
}

TEST(Train, DivergenceIsReported) {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.divergence_threshold = 1e-3;
  try {
    train(VisionTransformer<float>(synth_model(), 0), small_synthetic(), cfg);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.step(), 1);
    EXPECT_GT(e.loss(), 1e-3);
  }
}

TEST(Train, RejectsBadInputs) {
  const auto splits = small_synthetic();
  TrainConfig cfg;
  cfg.lambda = 1.0;
  EXPECT_THROW(train(VisionTransformer<float>(synth_model(1), 0), splits, cfg), ConfigError);
  cfg.lambda = -1.0;
  EXPECT_THROW(train(VisionTransformer<float>(synth_model(), 0), splits, cfg), ConfigError);
  auto missing = splits;
  missing.erase(data::SplitRole::kOodVal);
  EXPECT_THROW(train(VisionTransformer<float>(synth_model(), 0), missing, TrainConfig{}), ConfigError);
}

TEST(Train, WritesPeriodicCheckpoints) {
  const auto dir = testing::scratch_dir("train_ckpt");
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.checkpoint_every = 2;
  cfg.checkpoint_path = dir / "m.ckpt";
  train(VisionTransformer<float>(synth_model(), 0), small_synthetic(), cfg);
  std::map<std::string, std::string> meta;
  load_checkpoint<float>(dir / "m.ckpt", &meta);
  EXPECT_EQ(meta.at("step"), "6");
}

TEST(GridSelect, PicksBestOodValAndTiesBreakSmall) {
  TrainConfig a, b;
  a.lambda = 0.1;
  b.lambda = 1.0;
  EXPECT_TRUE(prefer_config(a, 0.5, b, 0.5));
  EXPECT_FALSE(prefer_config(b, 0.5, a, 0.5));
  EXPECT_TRUE(prefer_config(b, 0.6, a, 0.5));
  b.lambda = a.lambda;
  b.learning_rate = a.learning_rate * 3;
  EXPECT_TRUE(prefer_config(a, 0.5, b, 0.5));

  const auto splits = small_synthetic();
  TrainConfig base;
  base.epochs = 1;
  const auto grid = make_grid(base, {0.0, 1.0}, {1e-4, 3e-3});
  ASSERT_EQ(grid.size(), 4u);
  const auto best = grid_select<float>(grid, splits, synth_model());
  ASSERT_EQ(best.scores.size(), 4u);
  double top = -1;
  std::size_t arg = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    ASSERT_TRUE(best.scores[k].has_value());
    if (*best.scores[k] > top || (*best.scores[k] == top && prefer_config(grid[k], top, grid[arg], top))) {
      top = *best.scores[k];
      arg = k;
    }
  }
  EXPECT_EQ(best.index, arg);
  EXPECT_EQ(best.ood_val_acc, top);
  EXPECT_EQ(evaluate(best.model, splits.at(data::SplitRole::kOodVal)), top);
  EXPECT_THROW(grid_select<float>({}, splits, synth_model()), ConfigError);
  auto diverging = grid;
  for (auto& c : diverging) c.divergence_threshold = 1e-6;
  EXPECT_THROW(grid_select<float>(diverging, splits, synth_model()), Error);
}

TEST(Eval, PlantedModelSelectionAndProfile) {
  const auto splits = small_synthetic(0.9, 3);
  const auto model = testing::planted_model<double>(4, 2);
  const auto& ood_val = splits.at(data::SplitRole::kOodVal);
  // The full model follows the spurious heads.
  EXPECT_LT(evaluate(model, ood_val), 0.2);
  EXPECT_GT(evaluate(model, ood_val, {}, Target::kSpurious), 0.95);
  const auto choice = oracle_select_head(model, ood_val);
  EXPECT_EQ(choice.head, 2);
  ASSERT_EQ(choice.per_head.size(), 4u);
  EXPECT_GT(choice.accuracy, 0.9);
  EXPECT_EQ(choice.accuracy, choice.per_head[2]);
  const auto profile = profile_heads(model, splits.at(data::SplitRole::kBalancedProbe));
  ASSERT_EQ(profile.size(), 4u);
  EXPECT_GT(profile[2].robust_acc, 0.9);
  EXPECT_NEAR(profile[2].spurious_acc, 0.5, 0.1);
  EXPECT_GT(profile[0].spurious_acc, 0.95);
  EXPECT_EQ(count_specialized(profile), 4);
  EXPECT_EQ(count_specialized(profile, 0.99), 0);
  EXPECT_THROW(profile_heads(model, ood_val), ConfigError);
}

TEST(Eval, SelectionTiesGoToLowestHead) {
  const auto splits = small_synthetic(0.9, 4);
  const auto model = testing::planted_model<double>(3, -1);  // every head spurious
  const auto choice = oracle_select_head(model, splits.at(data::SplitRole::kOodVal));
  EXPECT_EQ(choice.per_head[0], choice.per_head[2]);
  EXPECT_EQ(choice.head, 0);
}

TEST(Eval, PredictionsMatchLogitsAndBatchingIsInvisible) {
  const auto splits = small_synthetic();
  const auto& s = splits.at(data::SplitRole::kIdTest);
  VisionTransformer<float> model(synth_model(), 5);
  const auto a = predict(model, s, {}, 7);
  const auto b = predict(model, s, {}, 1000);
  EXPECT_EQ(a, b);
  std::vector<std::size_t> idx(s.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  EXPECT_EQ(a, argmax_rows(model.logits(s.images<float>(idx))));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < s.size(); ++i) hits += a[i] == s.labels[i];
  EXPECT_DOUBLE_EQ(accuracy(a, s, Target::kLabel), static_cast<double>(hits) / static_cast<double>(s.size()));
}

TEST(Eval, MeanDiversityLeavesModelUntouched) {
  const auto splits = small_synthetic();
  VisionTransformer<double> model(synth_model(), 6);
  const auto before = testing::param_table(model);
  const double v = mean_diversity(model, splits.at(data::SplitRole::kIdVal), 32);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GE(v, 0.0);
  EXPECT_LE(v, 4.0 * 3.0);
  EXPECT_EQ(testing::param_table(model), before);
  EXPECT_FALSE(model.parameters()[0].requires_grad());
}

}  // namespace
}  // namespace vitdiv
