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

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "vitdiv/datasets.hpp"
#include "vitdiv/report.hpp"
#include "vitdiv/run_config.hpp"

namespace vitdiv {

/// Builds every split from the configured sources.
data::SplitMap build_splits(const RunConfig& config);

/// Loads prepared splits when `<splits_dir>/manifest.json` exists, otherwise builds them.
data::SplitMap load_or_build_splits(const RunConfig& config);

/// Records outputs of one command. Written as manifest.json next to a
/// resolved config snapshot (config.txt) in the run directory.
class RunManifest {
 public:
  RunManifest(const RunConfig& config, std::string command);
  void add_output(const std::filesystem::path& relative);
  /// Writes config.txt and manifest.json into the run directory.
  void write() const;

 private:
  RunConfig config_;
  std::string command_;
  std::vector<std::string> outputs_;
};

/// The four-row experiment. For every seed, ERM trains one model per learning
/// rate (lambda 0) and Div one per (lambda, learning rate). The ERM and Div
/// rows take the config with the best full-model ood-val accuracy; the +Sel
/// rows take the config whose oracle-selected head has the best ood-val
/// accuracy. Writes every checkpoint, history and evaluation plus the report
/// into the run directory. Rows: ERM, Div, ERM+Sel, Div+Sel.
std::vector<EvalReport> reproduce(const RunConfig& config, std::ostream& log);

}  // namespace vitdiv
