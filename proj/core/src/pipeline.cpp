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

#include "vitdiv/pipeline.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vitdiv/checkpoint.hpp"
#include "vitdiv/error.hpp"
#include "vitdiv/split_io.hpp"
#include "vitdiv/train.hpp"

namespace vitdiv {

data::SplitMap build_splits(const RunConfig& config) {
  if (config.dataset == DatasetKind::kSynthetic) {
    auto spec = config.synthetic;
    spec.counts = config.split_counts();
    return data::build_synthetic_spurious(spec, config.rho, config.data_seed);
  }
  config.validate_data_paths();
  const auto pools = data::load_mnist_cifar_pools(config.resolved_mnist_dir(), config.resolved_cifar_dir());
  return data::build_mnist_cifar(pools.digit0, pools.digit1, pools.car, pools.truck, config.rho, config.data_seed,
                                 config.split_counts());
}

data::SplitMap load_or_build_splits(const RunConfig& config) {
  const auto dir = config.resolved_splits_dir();
  if (std::filesystem::exists(dir / "manifest.json")) return data::load_splits(dir);
  return build_splits(config);
}

RunManifest::RunManifest(const RunConfig& config, std::string command)
    : config_(config), command_(std::move(command)) {}

void RunManifest::add_output(const std::filesystem::path& relative) { outputs_.push_back(relative.generic_string()); }

void RunManifest::write() const {
  std::filesystem::create_directories(config_.out_dir);
  {
    std::ofstream out(config_.out_dir / "config.txt");
    if (!out) throw Error("cannot write " + (config_.out_dir / "config.txt").string());
    out << "# resolved configuration for '" << command_ << "'\n" << config_.to_text();
  }
  nlohmann::json j;
  j["format"] = "vitdiv-run";
  j["version"] = 1;
  j["command"] = command_;
  j["dataset"] = dataset_name(config_.dataset);
  j["config"] = "config.txt";
  j["outputs"] = outputs_;
  std::ofstream out(config_.out_dir / "manifest.json");
  if (!out) throw Error("cannot write " + (config_.out_dir / "manifest.json").string());
  out << j.dump(2) << '\n';
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text << '\n';
}

std::string grid_stem(const std::string& recipe, const TrainConfig& c) {
  std::ostringstream s;
  s << recipe << "_seed" << c.seed << "_lambda" << c.lambda << "_lr" << c.learning_rate;
  return s.str();
}

struct Candidate {
  TrainConfig config;
  SeedEval eval;
};

template <typename T>
std::vector<EvalReport> reproduce_at(const RunConfig& config, const data::SplitMap& splits, std::ostream& log,
                                     RunManifest& manifest) {
  const auto model_config = config.model_config();
  struct Recipe {
    std::string name;
    std::vector<double> lambdas;
  };
  const std::vector<Recipe> recipes = {{"ERM", {0.0}}, {"Div", config.lambda_grid}};
  std::vector<EvalReport> full, selected;
  for (const auto& r : recipes) {
    full.push_back({r.name, false, {}});
    selected.push_back({r.name + "+Sel", true, {}});
  }
  const std::filesystem::path models_dir = "models";
  std::filesystem::create_directories(config.out_dir / models_dir);

  for (const auto seed : config.seed_list()) {
    for (std::size_t r = 0; r < recipes.size(); ++r) {
      std::vector<Candidate> candidates;
      for (const auto& c : make_grid(config.train_config(seed), recipes[r].lambdas, config.lr_grid)) {
        const auto stem = grid_stem(recipes[r].name, c);
        try {
          auto result = train(VisionTransformer<T>(model_config, c.seed), splits, c);
          auto eval = evaluate_seed(result.model, splits, seed);
          eval.lambda = c.lambda;
          eval.learning_rate = c.learning_rate;
          log << stem << ": id " << eval.id_acc << " ood " << eval.ood_acc << " ood-val " << eval.ood_val_acc
              << " | head " << eval.selected_head << " sel-ood " << eval.selected_ood_acc << " sel-val "
              << eval.selected_val_acc << " | specialized " << eval.specialized_heads << std::endl;
          save_checkpoint(config.out_dir / models_dir / (stem + ".ckpt"), result.model,
                          {{"lambda", std::to_string(c.lambda)},
                           {"learning_rate", std::to_string(c.learning_rate)},
                           {"seed", std::to_string(seed)}});
          result.history.write_csv(config.out_dir / models_dir / (stem + ".history.csv"));
          write_text(config.out_dir / models_dir / (stem + ".eval.json"), seed_eval_to_json(eval));
          for (const char* ext : {".ckpt", ".history.csv", ".eval.json"}) {
            manifest.add_output(models_dir / (stem + ext));
          }
          candidates.push_back({c, std::move(eval)});
        } catch (const TrainingDiverged& e) {
          log << stem << ": " << e.what() << std::endl;
        }
      }
      if (candidates.empty()) throw Error(recipes[r].name + ": every run in the grid diverged");
      // Each row picks its hyperparameters by its own ood-val accuracy.
      const Candidate* best_full = &candidates.front();
      const Candidate* best_sel = &candidates.front();
      for (const auto& c : candidates) {
        if (prefer_config(c.config, c.eval.ood_val_acc, best_full->config, best_full->eval.ood_val_acc)) {
          best_full = &c;
        }
        if (prefer_config(c.config, c.eval.selected_val_acc, best_sel->config, best_sel->eval.selected_val_acc)) {
          best_sel = &c;
        }
      }
      full[r].runs.push_back(best_full->eval);
      selected[r].runs.push_back(best_sel->eval);
    }
  }
  full.insert(full.end(), selected.begin(), selected.end());
  return full;
}

}  // namespace

std::vector<EvalReport> reproduce(const RunConfig& config, std::ostream& log) {
  config.validate();
  const auto splits = load_or_build_splits(config);
  RunManifest manifest(config, "reproduce");
  auto reports = config.train.float64 ? reproduce_at<double>(config, splits, log, manifest)
                                      : reproduce_at<float>(config, splits, log, manifest);
  emit_report(reports, config.out_dir);
  for (const char* f : {"report.json", "table.csv", "per_head.csv"}) manifest.add_output(f);
  manifest.write();
  return reports;
}

}  // namespace vitdiv
