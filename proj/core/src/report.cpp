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

#include "vitdiv/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vitdiv/error.hpp"
#include "vitdiv/eval.hpp"

namespace vitdiv {

namespace {

using json = nlohmann::json;

const data::DatasetSplit& split_for(const data::SplitMap& splits, data::SplitRole role) {
  const auto it = splits.find(role);
  if (it == splits.end()) {
    throw ConfigError("splits", "missing " + std::string(data::role_name(role)) + " split");
  }
  return it->second;
}

json to_json(const SeedEval& e) {
  json j;
  j["seed"] = e.seed;
  j["lambda"] = e.lambda;
  j["learning_rate"] = e.learning_rate;
  j["id_acc"] = e.id_acc;
  j["ood_acc"] = e.ood_acc;
  j["ood_val_acc"] = e.ood_val_acc;
  j["selected_head"] = e.selected_head;
  j["selected_val_acc"] = e.selected_val_acc;
  j["selected_id_acc"] = e.selected_id_acc;
  j["selected_ood_acc"] = e.selected_ood_acc;
  j["specialized_heads"] = e.specialized_heads;
  j["mean_l_div"] = e.mean_l_div ? json(*e.mean_l_div) : json(nullptr);
  j["per_head"] = json::array();
  for (const auto& h : e.per_head) {
    j["per_head"].push_back({{"head", h.head},
                             {"ood_val_acc", h.ood_val_acc},
                             {"robust_acc", h.robust_acc},
                             {"spurious_acc", h.spurious_acc}});
  }
  return j;
}

SeedEval from_json(const json& j) {
  SeedEval e;
  e.seed = j.at("seed").get<std::uint64_t>();
  e.lambda = j.at("lambda").get<double>();
  e.learning_rate = j.at("learning_rate").get<double>();
  e.id_acc = j.at("id_acc").get<double>();
  e.ood_acc = j.at("ood_acc").get<double>();
  e.ood_val_acc = j.at("ood_val_acc").get<double>();
  e.selected_head = j.at("selected_head").get<std::int64_t>();
  e.selected_val_acc = j.at("selected_val_acc").get<double>();
  e.selected_id_acc = j.at("selected_id_acc").get<double>();
  e.selected_ood_acc = j.at("selected_ood_acc").get<double>();
  e.specialized_heads = j.at("specialized_heads").get<std::int64_t>();
  if (!j.at("mean_l_div").is_null()) e.mean_l_div = j.at("mean_l_div").get<double>();
  for (const auto& h : j.at("per_head")) {
    e.per_head.push_back({h.at("head").get<std::int64_t>(), h.at("ood_val_acc").get<double>(),
                          h.at("robust_acc").get<double>(), h.at("spurious_acc").get<double>()});
  }
  return e;
}

json aggregate_json(std::span<const double> values) {
  const auto a = aggregate(values);
  return {{"values", a.values}, {"mean", a.mean}, {"std", a.stddev}};
}

void check_reports(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw Error("emit_report: no reports");
  for (const auto& r : reports) {
    if (r.runs.empty()) throw Error("emit_report: '" + r.method + "' has an empty seed list");
  }
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  return out;
}

}  // namespace

template <typename T>
SeedEval evaluate_seed(const VisionTransformer<T>& model, const data::SplitMap& splits, std::uint64_t seed,
                       bool with_diversity) {
  const auto& id_test = split_for(splits, data::SplitRole::kIdTest);
  const auto& ood_val = split_for(splits, data::SplitRole::kOodVal);
  const auto& ood_test = split_for(splits, data::SplitRole::kOodTest);
  const auto& probe = split_for(splits, data::SplitRole::kBalancedProbe);
  const auto& cfg = model.config();

  SeedEval e;
  e.seed = seed;
  e.id_acc = evaluate(model, id_test);
  e.ood_acc = evaluate(model, ood_test);
  e.ood_val_acc = evaluate(model, ood_val);
  const auto choice = oracle_select_head(model, ood_val);
  e.selected_head = choice.head;
  e.selected_val_acc = choice.accuracy;
  const auto masks = single_head_masks(cfg, cfg.regularized_layer, choice.head);
  e.selected_id_acc = evaluate(model, id_test, masks);
  e.selected_ood_acc = evaluate(model, ood_test, masks);
  const auto profile = profile_heads(model, probe);
  e.specialized_heads = count_specialized(profile);
  for (const auto& p : profile) {
    e.per_head.push_back({p.head, choice.per_head.at(static_cast<std::size_t>(p.head)), p.robust_acc,
                          p.spurious_acc});
  }
  if (with_diversity && cfg.heads > 1 && !cfg.use_residual) e.mean_l_div = mean_diversity(model, probe);
  return e;
}

template SeedEval evaluate_seed(const VisionTransformer<float>&, const data::SplitMap&, std::uint64_t, bool);
template SeedEval evaluate_seed(const VisionTransformer<double>&, const data::SplitMap&, std::uint64_t, bool);

Aggregate aggregate(std::span<const double> values) {
  if (values.empty()) throw Error("aggregate: empty seed list");
  Aggregate a;
  a.values.assign(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

std::string seed_eval_to_json(const SeedEval& eval) { return to_json(eval).dump(2); }

SeedEval seed_eval_from_json(std::string_view text) {
  try {
    return from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("seed evaluation: ") + e.what(), 0);
  }
}

std::string report_json(const std::vector<EvalReport>& reports) {
  check_reports(reports);
  json root;
  root["format"] = "vitdiv-report";
  root["version"] = 1;
  root["metric"] = kReportMetric;
  root["specialization_threshold"] = kSpecializationThreshold;
  root["rows"] = json::array();
  for (const auto& r : reports) {
    std::vector<double> id, ood, spec;
    std::vector<std::uint64_t> seeds;
    json runs = json::array();
    for (const auto& run : r.runs) {
      seeds.push_back(run.seed);
      id.push_back(r.id_acc(run));
      ood.push_back(r.ood_acc(run));
      spec.push_back(static_cast<double>(run.specialized_heads));
      runs.push_back(to_json(run));
    }
    json row;
    row["method"] = r.method;
    row["selected"] = r.selected;
    row["seeds"] = seeds;
    row["id_acc"] = aggregate_json(id);
    row["ood_acc"] = aggregate_json(ood);
    row["specialized_heads"] = aggregate_json(spec);
    row["runs"] = runs;
    root["rows"].push_back(row);
  }
  return root.dump(2);
}

void emit_report(const std::vector<EvalReport>& reports, const std::filesystem::path& dir) {
  const auto text = report_json(reports);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());

  open_output(dir / "report.json") << text << '\n';

  auto table = open_output(dir / "table.csv");
  table << "method,id_mean,id_std,ood_mean,ood_std,seeds\n";
  for (const auto& r : reports) {
    std::vector<double> id, ood;
    for (const auto& run : r.runs) {
      id.push_back(r.id_acc(run));
      ood.push_back(r.ood_acc(run));
    }
    const auto a = aggregate(id), b = aggregate(ood);
    table << r.method << ',' << a.mean << ',' << a.stddev << ',' << b.mean << ',' << b.stddev << ','
          << r.runs.size() << '\n';
  }

  auto heads = open_output(dir / "per_head.csv");
  heads << "method,seed,head,ood_val_acc,robust_acc,spurious_acc\n";
  for (const auto& r : reports) {
    for (const auto& run : r.runs) {
      for (const auto& h : run.per_head) {
        heads << r.method << ',' << run.seed << ',' << h.head << ',' << h.ood_val_acc << ',' << h.robust_acc
              << ',' << h.spurious_acc << '\n';
      }
    }
  }
}

}  // namespace vitdiv
