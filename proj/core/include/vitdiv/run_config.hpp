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
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vitdiv/datasets.hpp"
#include "vitdiv/model.hpp"
#include "vitdiv/train.hpp"

namespace vitdiv {

/// Environment variable that overrides `data_root`.
inline constexpr const char* kDataRootEnv = "VITDIV_DATA_ROOT";

enum class DatasetKind { kMnistCifar, kSynthetic };

/// Every setting of a run, flat. Text form is one `key = value` per line with
/// `#` comments; list values are comma separated.
struct RunConfig {
  // data
  DatasetKind dataset = DatasetKind::kSynthetic;
  std::filesystem::path data_root = "data";
  std::filesystem::path mnist_dir;  // empty: <data_root>/mnist
  std::filesystem::path cifar_dir;  // empty: <data_root>/cifar
  std::filesystem::path splits_dir;  // empty: <out_dir>/splits
  double rho = 0.9;
  std::uint64_t data_seed = 0;
  std::int64_t train_count = 0;  // 0: dataset default
  std::int64_t val_count = 0;    // id-val and ood-val
  std::int64_t test_count = 0;   // id-test and ood-test
  std::int64_t probe_count = 0;
  data::SyntheticSpec synthetic;

  // model (image extents follow the dataset)
  std::int64_t patch_size = 0;  // 0: 8 for mnist-cifar, 4 for synthetic
  std::int64_t dim = 16;
  std::int64_t heads = 8;
  std::int64_t layers = 1;
  std::int64_t mlp_hidden = 0;
  bool use_residual = false;
  bool qkv_bias = false;
  std::int64_t regularized_layer = 0;

  // training
  TrainConfig train;
  std::vector<double> lambda_grid = {0.1, 1.0, 10.0};
  std::vector<double> lr_grid = {1e-4, 3e-4};
  bool grid = false;  // `train` runs grid_select instead of one config

  // seeds: `seeds` runs starting at `seed`
  std::uint64_t seed = 0;
  std::int64_t seeds = 3;

  // outputs and inputs
  std::filesystem::path out_dir = "runs/latest";
  std::filesystem::path checkpoint;  // empty: <out_dir>/model.ckpt
  std::string inputs;                // report: METHOD=path,METHOD=path,...

  /// Names of every recognized key, in snapshot order.
  static const std::vector<std::string>& keys();

  /// Parses and stores one value; throws ConfigError naming the key.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;

  /// Applies `key = value` lines. Unknown keys are rejected.
  void apply_text(std::string_view text);
  void apply_file(const std::filesystem::path& path);
  /// Replaces data_root with $VITDIV_DATA_ROOT when set.
  void apply_environment();

  /// Resolved snapshot in the same text format.
  std::string to_text() const;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  /// Like validate(), plus existence checks on the dataset directories.
  void validate_data_paths() const;

  std::filesystem::path resolved_mnist_dir() const;
  std::filesystem::path resolved_cifar_dir() const;
  std::filesystem::path resolved_splits_dir() const;
  std::filesystem::path resolved_checkpoint() const;
  std::vector<std::uint64_t> seed_list() const;
  data::SplitCounts split_counts() const;
  /// Architecture for this dataset.
  ModelConfig model_config() const;
  /// Training config for one seed.
  TrainConfig train_config(std::uint64_t run_seed) const;
};

std::string_view dataset_name(DatasetKind kind);

}  // namespace vitdiv
