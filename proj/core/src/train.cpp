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

#include "vitdiv/train.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vitdiv/autograd.hpp"
#include "vitdiv/checkpoint.hpp"
#include "vitdiv/error.hpp"
#include "vitdiv/eval.hpp"
#include "vitdiv/ops.hpp"
#include "vitdiv/rng.hpp"

namespace vitdiv {

void TrainConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda", "must be finite and >= 0");
  adam().validate();
  if (epochs < 1) throw ConfigError("epochs", "must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (eval_every < 0) throw ConfigError("eval_every", "must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every", "must be >= 0");
  if (!(diversity_epsilon > 0.0)) throw ConfigError("diversity_epsilon", "must be positive");
  if (!(divergence_threshold > 0.0)) throw ConfigError("divergence_threshold", "must be positive");
}

std::string TrainHistory::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "step,l_erm";
  if (has_div) out << ",l_div";
  out << ",id_val_acc,ood_val_acc\n";
  for (const auto& r : records) {
    out << r.step << ',' << r.l_erm;
    if (has_div) out << ',' << r.l_div.value_or(0.0);
    out << ',' << r.id_val_acc << ',' << r.ood_val_acc << '\n';
  }
  return out.str();
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_csv();
}

namespace {

constexpr std::size_t kLossProbeSize = 512;
constexpr std::uint64_t kShuffleStream = 1'000'000;

const data::DatasetSplit& require_split(const data::SplitMap& splits, data::SplitRole role) {
  const auto it = splits.find(role);
  if (it == splits.end() || it->second.size() == 0) {
    throw ConfigError("splits", "missing or empty " + std::string(data::role_name(role)) + " split");
  }
  return it->second;
}

template <typename T>
double probe_loss(const VisionTransformer<T>& model, const data::DatasetSplit& split) {
  ad::NoGradGuard no_grad;
  std::vector<std::size_t> idx(std::min(split.size(), kLossProbeSize));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto logits = model.logits(split.images<T>(idx));
  return static_cast<double>(cross_entropy(logits, split.targets(idx, false)).item());
}

}  // namespace

template <typename T>
TrainResult<T> train(VisionTransformer<T> model, const data::SplitMap& splits, const TrainConfig& config) {
  config.validate();
  const auto& train_split = require_split(splits, data::SplitRole::kTrain);
  const auto& ood_val = require_split(splits, data::SplitRole::kOodVal);
  const auto id_it = splits.find(data::SplitRole::kIdVal);
  const data::DatasetSplit* id_val =
      id_it != splits.end() && id_it->second.size() > 0 ? &id_it->second : nullptr;

  const bool use_div = config.lambda > 0.0;
  const auto& cfg = model.config();
  if (use_div && cfg.heads < 2) throw ConfigError("lambda", "the diversity penalty needs at least two heads");

  ad::GradModeGuard grad_on(true);
  model.set_requires_grad(true);
  const auto params = model.parameters();
  Adam<T> optimizer(params, config.adam());

  TrainHistory history;
  history.has_div = use_div;
  history.initial_train_loss = probe_loss(model, train_split);

  const std::size_t n = train_split.size();
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const std::int64_t steps_per_epoch = static_cast<std::int64_t>((n + batch - 1) / batch);
  const std::int64_t eval_every = config.eval_every > 0 ? config.eval_every : steps_per_epoch;
  const T lambda = static_cast<T>(config.lambda);

  double erm_sum = 0.0, div_sum = 0.0;
  std::int64_t window = 0;
  std::int64_t step = 0;
  std::vector<std::size_t> order(n);

  auto record = [&]() {
    HistoryRecord r;
    r.step = step;
    r.l_erm = erm_sum / static_cast<double>(window);
    if (use_div) r.l_div = div_sum / static_cast<double>(window);
    r.ood_val_acc = evaluate(model, ood_val);
    r.id_val_acc = id_val ? evaluate(model, *id_val) : 0.0;
    history.records.push_back(r);
    erm_sum = div_sum = 0.0;
    window = 0;
  };

  for (std::int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(config.seed, kShuffleStream + static_cast<std::uint64_t>(epoch));
    rng.shuffle(std::span(order));
    for (std::size_t begin = 0; begin < n; begin += batch) {
      const std::span<const std::size_t> idx(order.data() + begin, std::min(batch, n - begin));
      const auto images = train_split.images<T>(idx);
      const auto labels = train_split.targets(idx, false);

      ad::Tensor<T> loss, ce;
      double div_value = 0.0;
      if (use_div) {
        ForwardOptions options;
        options.differentiable_inputs = true;
        const auto trace = model.forward(images, options);
        ce = cross_entropy(trace.logits, labels);
        const auto grads = per_head_input_gradients(trace, cfg.regularized_layer, true, config.score);
        const auto div = diversity_loss(grads, static_cast<T>(config.diversity_epsilon));
        div_value = static_cast<double>(div.total.item());
        loss = ad::add(ce, ad::scale(div.total, lambda));
      } else {
        ce = cross_entropy(model.logits(images), labels);
        loss = ce;
      }
      ++step;
      const double loss_value = static_cast<double>(loss.item());
      if (!std::isfinite(loss_value) || loss_value > config.divergence_threshold) {
        throw TrainingDiverged(step, loss_value);
      }
      const auto grads = ad::grad(loss, params);
      optimizer.step(grads);

      erm_sum += static_cast<double>(ce.item());
      div_sum += div_value;
      ++window;
      if (step % eval_every == 0) record();
      if (config.checkpoint_every > 0 && !config.checkpoint_path.empty() &&
          step % config.checkpoint_every == 0) {
        save_checkpoint(config.checkpoint_path, model, {{"step", std::to_string(step)}});
      }
    }
  }
  if (window > 0) record();

  history.steps = step;
  history.skipped_steps = optimizer.skipped();
  history.final_train_loss = probe_loss(model, train_split);
  model.set_requires_grad(false);
  return {std::move(model), std::move(history)};
}

bool prefer_config(const TrainConfig& a, double acc_a, const TrainConfig& b, double acc_b) {
  if (acc_a != acc_b) return acc_a > acc_b;
  if (a.lambda != b.lambda) return a.lambda < b.lambda;
  return a.learning_rate < b.learning_rate;
}

std::vector<TrainConfig> make_grid(const TrainConfig& base, const std::vector<double>& lambdas,
                                   const std::vector<double>& learning_rates) {
  std::vector<TrainConfig> grid;
  for (double l : lambdas) {
    for (double lr : learning_rates) {
      TrainConfig c = base;
      c.lambda = l;
      c.learning_rate = lr;
      grid.push_back(c);
    }
  }
  return grid;
}

template <typename T>
GridResult<T> grid_select(const std::vector<TrainConfig>& grid, const data::SplitMap& splits,
                          const ModelConfig& model_config) {
  if (grid.empty()) throw ConfigError("grid", "must contain at least one config");
  for (const auto& c : grid) c.validate();
  model_config.validate();

  std::optional<GridResult<T>> best;
  std::vector<std::optional<double>> scores;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto& c = grid[k];
    try {
      auto result = train(VisionTransformer<T>(model_config, c.seed), splits, c);
      const double acc = evaluate(result.model, splits.at(data::SplitRole::kOodVal));
      scores.push_back(acc);
      if (!best || prefer_config(c, acc, best->config, best->ood_val_acc)) {
        best.emplace(GridResult<T>{c, std::move(result.model), std::move(result.history), acc, k, {}});
      }
    } catch (const TrainingDiverged&) {
      scores.push_back(std::nullopt);
    }
  }
  if (!best) throw Error("grid_select: every run in the grid diverged");
  best->scores = std::move(scores);
  return std::move(*best);
}

template TrainResult<float> train(VisionTransformer<float>, const data::SplitMap&, const TrainConfig&);
template TrainResult<double> train(VisionTransformer<double>, const data::SplitMap&, const TrainConfig&);
template GridResult<float> grid_select(const std::vector<TrainConfig>&, const data::SplitMap&,
                                       const ModelConfig&);
template GridResult<double> grid_select(const std::vector<TrainConfig>&, const data::SplitMap&,
                                        const ModelConfig&);

}  // namespace vitdiv
