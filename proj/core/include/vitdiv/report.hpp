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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vitdiv/datasets.hpp"
#include "vitdiv/model.hpp"

namespace vitdiv {

inline constexpr std::string_view kReportMetric = "attribute_prediction_accuracy";

struct HeadScore {
  std::int64_t head = 0;
  double ood_val_acc = 0.0;
  double robust_acc = 0.0;    // label accuracy on the balanced probe
  double spurious_acc = 0.0;  // spurious-attribute accuracy on the balanced probe

  bool operator==(const HeadScore&) const = default;
};

/// Everything measured for one trained model.
struct SeedEval {
  std::uint64_t seed = 0;
  double lambda = 0.0;
  double learning_rate = 0.0;
  double id_acc = 0.0;       // full model, id-test
  double ood_acc = 0.0;      // full model, ood-test
  double ood_val_acc = 0.0;  // full model, ood-val
  std::int64_t selected_head = 0;
  double selected_val_acc = 0.0;  // ood-val accuracy of the selected head
  double selected_id_acc = 0.0;
  double selected_ood_acc = 0.0;
  std::int64_t specialized_heads = 0;
  std::vector<HeadScore> per_head;
  std::optional<double> mean_l_div;  // on the balanced probe

  bool operator==(const SeedEval&) const = default;
};

/// One table row across seeds. A `selected` row reports the single-head
/// accuracies of its runs, otherwise the full-model ones.
struct EvalReport {
  std::string method;
  bool selected = false;
  std::vector<SeedEval> runs;

  double id_acc(const SeedEval& run) const { return selected ? run.selected_id_acc : run.id_acc; }
  double ood_acc(const SeedEval& run) const { return selected ? run.selected_ood_acc : run.ood_acc; }
};

/// Needs id-test, ood-val, ood-test and balanced-probe splits.
template <typename T>
SeedEval evaluate_seed(const VisionTransformer<T>& model, const data::SplitMap& splits, std::uint64_t seed,
                       bool with_diversity = true);

struct Aggregate {
  std::vector<double> values;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single value
};

/// Throws on an empty input.
Aggregate aggregate(std::span<const double> values);

std::string seed_eval_to_json(const SeedEval& eval);
SeedEval seed_eval_from_json(std::string_view text);

/// Renders report.json with one row per report, in order.
std::string report_json(const std::vector<EvalReport>& reports);

/// Writes report.json, table.csv and per_head.csv into `dir`. Throws on an
/// empty report list, a row with no runs, or an unwritable directory.
void emit_report(const std::vector<EvalReport>& reports, const std::filesystem::path& dir);

}  // namespace vitdiv
