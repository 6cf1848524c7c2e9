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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vitdiv/datasets.hpp"
#include "vitdiv/diversity.hpp"
#include "vitdiv/model.hpp"
#include "vitdiv/optim.hpp"

namespace vitdiv {

struct TrainConfig {
  double lambda = 0.0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::int64_t epochs = 10;
  std::int64_t batch_size = 64;
  std::uint64_t seed = 0;
  bool float64 = false;
  std::int64_t eval_every = 0;  // steps between history records; 0 means once per epoch
  double diversity_epsilon = kDefaultDiversityEpsilon;
  ScoreKind score = ScoreKind::kLogit;
  double divergence_threshold = 1e4;
  // Periodic checkpoints; disabled when the path is empty or the interval is 0.
  std::filesystem::path checkpoint_path;
  std::int64_t checkpoint_every = 0;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, beta1, beta2, adam_eps}; }
};

struct HistoryRecord {
  std::int64_t step = 0;
  double l_erm = 0.0;                // mean training cross-entropy since the previous record
  std::optional<double> l_div;       // same for the diversity penalty; empty when lambda == 0
  double id_val_acc = 0.0;
  double ood_val_acc = 0.0;
};

struct TrainHistory {
  std::vector<HistoryRecord> records;
  bool has_div = false;
  std::int64_t steps = 0;
  std::int64_t skipped_steps = 0;
  // Cross-entropy over a fixed slice of the training split, before and after.
  double initial_train_loss = 0.0;
  double final_train_loss = 0.0;

  /// Columns: step,l_erm,id_val_acc,ood_val_acc with l_div inserted after
  /// l_erm when the penalty was active.
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

template <typename T>
struct TrainResult {
  VisionTransformer<T> model;
  TrainHistory history;
};

/// Mini-batch training of cross-entropy plus lambda times the batch-mean
/// diversity penalty at the model's regularized layer. Needs the train and
/// ood-val splits; id-val is recorded when present. Throws TrainingDiverged
/// when a batch loss exceeds the divergence threshold or is non-finite.
template <typename T>
TrainResult<T> train(VisionTransformer<T> model, const data::SplitMap& splits, const TrainConfig& config);

template <typename T>
struct GridResult {
  TrainConfig config;
  VisionTransformer<T> model;
  TrainHistory history;
  double ood_val_acc = 0.0;
  std::size_t index = 0;                 // position of the winner in the grid
  std::vector<std::optional<double>> scores;  // per grid entry; empty when the run diverged
};

/// Trains every config from a fresh model initialized with that config's seed
/// and keeps the best ood-val accuracy; ties go to the smaller lambda, then
/// the lower learning rate. Throws if the grid is empty or every run diverged.
template <typename T>
GridResult<T> grid_select(const std::vector<TrainConfig>& grid, const data::SplitMap& splits,
                          const ModelConfig& model_config);

/// Whether (a, acc_a) beats the incumbent (b, acc_b): higher accuracy, then
/// smaller lambda, then lower learning rate.
bool prefer_config(const TrainConfig& a, double acc_a, const TrainConfig& b, double acc_b);

/// Cartesian product of lambdas and learning rates over a base config.
std::vector<TrainConfig> make_grid(const TrainConfig& base, const std::vector<double>& lambdas,
                                   const std::vector<double>& learning_rates);

}  // namespace vitdiv
