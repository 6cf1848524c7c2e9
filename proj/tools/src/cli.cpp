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

#include "vitdiv_cli/cli.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vitdiv/checkpoint.hpp"
#include "vitdiv/error.hpp"
#include "vitdiv/eval.hpp"
#include "vitdiv/pipeline.hpp"
#include "vitdiv/report.hpp"
#include "vitdiv/run_config.hpp"
#include "vitdiv/split_io.hpp"
#include "vitdiv/train.hpp"

namespace vitdiv::cli {

namespace {

struct Command {
  const char* name;
  const char* help;
};

constexpr Command kCommands[] = {
    {"prepare-data", "Build the dataset splits and write them to splits_dir"},
    {"train", "Train one config (or grid_select with --grid true) and save a checkpoint"},
    {"eval", "Evaluate a checkpoint on every split and write eval.json"},
    {"select-head", "Pick the single head with the best ood-val accuracy"},
    {"profile-heads", "Per-head label and spurious-attribute accuracy on the balanced probe"},
    {"report", "Aggregate eval.json files (--inputs METHOD=path,...) into a report; METHOD+Sel rows use the selected head"},
    {"reproduce", "Train and evaluate ERM, Div, ERM+Sel and Div+Sel over all seeds"},
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string percent(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * v;
  return s.str();
}

int prepare_data(const RunConfig& cfg, std::ostream& out) {
  cfg.validate_data_paths();
  const auto splits = build_splits(cfg);
  const auto dir = cfg.resolved_splits_dir();
  data::save_splits(dir, splits);
  RunManifest manifest(cfg, "prepare-data");
  manifest.add_output(std::filesystem::relative(dir / "manifest.json", cfg.out_dir));
  manifest.write();
  for (const auto& [role, split] : splits) {
    const auto g = split.group_counts();
    out << std::left << std::setw(15) << data::role_name(role) << " n=" << split.size() << " rho=" << split.correlation
        << " groups=" << g[0] << '/' << g[1] << '/' << g[2] << '/' << g[3] << '\n';
  }
  out << "wrote " << (dir / "manifest.json").string() << '\n';
  return kExitOk;
}

template <typename T>
int train_command(const RunConfig& cfg, std::ostream& out) {
  const auto splits = load_or_build_splits(cfg);
  const auto model_config = cfg.model_config();
  auto base = cfg.train_config(cfg.seed);
  const auto ckpt = cfg.resolved_checkpoint();
  base.checkpoint_path = ckpt;
  RunManifest manifest(cfg, "train");

  std::optional<VisionTransformer<T>> model;
  TrainHistory history;
  TrainConfig chosen = base;
  if (cfg.grid) {
    auto best = grid_select<T>(make_grid(base, cfg.lambda_grid, cfg.lr_grid), splits, model_config);
    chosen = best.config;
    model.emplace(std::move(best.model));
    history = std::move(best.history);
    out << "grid_select picked lambda=" << chosen.lambda << " learning_rate=" << chosen.learning_rate
        << " (ood-val " << percent(best.ood_val_acc) << "%)\n";
  } else {
    auto result = train(VisionTransformer<T>(model_config, base.seed), splits, base);
    model.emplace(std::move(result.model));
    history = std::move(result.history);
  }
  save_checkpoint(ckpt, *model,
                  {{"lambda", std::to_string(chosen.lambda)},
                   {"learning_rate", std::to_string(chosen.learning_rate)},
                   {"seed", std::to_string(chosen.seed)}});
  history.write_csv(cfg.out_dir / "history.csv");
  manifest.add_output(std::filesystem::relative(ckpt, cfg.out_dir));
  manifest.add_output("history.csv");
  manifest.write();
  const auto& last = history.records.back();
  out << "steps=" << history.steps << " train_loss " << history.initial_train_loss << " -> "
      << history.final_train_loss << " id-val " << percent(last.id_val_acc) << "% ood-val "
      << percent(last.ood_val_acc) << "%\n";
  out << "wrote " << ckpt.string() << '\n';
  return kExitOk;
}

template <typename T>
int eval_command(const RunConfig& cfg, const std::string& command, std::ostream& out) {
  std::map<std::string, std::string> meta;
  const auto model = load_checkpoint<T>(cfg.resolved_checkpoint(), &meta);
  const auto splits = load_or_build_splits(cfg);
  RunManifest manifest(cfg, command);

  if (command == "select-head") {
    const auto choice = oracle_select_head(model, splits.at(data::SplitRole::kOodVal));
    nlohmann::json j;
    j["selected_head"] = choice.head;
    j["ood_val_acc"] = choice.accuracy;
    j["per_head_ood_val_acc"] = choice.per_head;
    write_text(cfg.out_dir / "selection.json", j.dump(2) + "\n");
    manifest.add_output("selection.json");
    for (std::size_t h = 0; h < choice.per_head.size(); ++h) {
      out << "head " << h << ": ood-val " << percent(choice.per_head[h]) << "%\n";
    }
    out << "selected head " << choice.head << '\n';
  } else if (command == "profile-heads") {
    const auto profile = profile_heads(model, splits.at(data::SplitRole::kBalancedProbe));
    std::ostringstream csv;
    csv.precision(17);
    csv << "head,robust_acc,spurious_acc\n";
    for (const auto& p : profile) {
      csv << p.head << ',' << p.robust_acc << ',' << p.spurious_acc << '\n';
      out << "head " << p.head << ": robust " << percent(p.robust_acc) << "% spurious " << percent(p.spurious_acc)
          << "%\n";
    }
    write_text(cfg.out_dir / "profile.csv", csv.str());
    manifest.add_output("profile.csv");
    out << count_specialized(profile) << " specialized head(s)\n";
  } else {
    const std::uint64_t seed = meta.count("seed") ? std::stoull(meta.at("seed")) : cfg.seed;
    auto eval = evaluate_seed(model, splits, seed);
    if (meta.count("lambda")) eval.lambda = std::stod(meta.at("lambda"));
    if (meta.count("learning_rate")) eval.learning_rate = std::stod(meta.at("learning_rate"));
    write_text(cfg.out_dir / "eval.json", seed_eval_to_json(eval) + "\n");
    manifest.add_output("eval.json");
    out << "id-test " << percent(eval.id_acc) << "% ood-test " << percent(eval.ood_acc) << "% selected head "
        << eval.selected_head << " (id " << percent(eval.selected_id_acc) << "% ood "
        << percent(eval.selected_ood_acc) << "%)\n";
  }
  manifest.write();
  return kExitOk;
}

std::vector<EvalReport> parse_inputs(const std::string& inputs) {
  if (inputs.empty()) throw ConfigError("inputs", "expected METHOD=path[,METHOD=path...]");
  std::vector<EvalReport> reports;
  std::istringstream in(inputs);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
      throw ConfigError("inputs", "entry '" + item + "' is not METHOD=path");
    }
    const auto name = item.substr(0, eq);
    const std::filesystem::path path = item.substr(eq + 1);
    std::ifstream file(path);
    if (!file) throw ConfigError("inputs", "cannot read " + path.string());
    std::ostringstream text;
    text << file.rdbuf();
    auto it = std::find_if(reports.begin(), reports.end(), [&](const EvalReport& r) { return r.method == name; });
    if (it == reports.end()) {
      const bool selected = name.size() > 4 && name.ends_with("+Sel");
      it = reports.insert(reports.end(), EvalReport{name, selected, {}});
    }
    it->runs.push_back(seed_eval_from_json(text.str()));
  }
  return reports;
}

void print_table(const std::vector<EvalReport>& reports, std::ostream& out) {
  out << std::left << std::setw(10) << "method" << std::right << std::setw(20) << "ID" << std::setw(20) << "OOD"
      << '\n';
  for (const auto& r : reports) {
    std::vector<double> id, ood;
    for (const auto& run : r.runs) {
      id.push_back(r.id_acc(run));
      ood.push_back(r.ood_acc(run));
    }
    const auto a = aggregate(id), b = aggregate(ood);
    out << std::left << std::setw(10) << r.method << std::right << std::setw(20)
        << (percent(a.mean) + " +- " + percent(a.stddev)) << std::setw(20)
        << (percent(b.mean) + " +- " + percent(b.stddev)) << '\n';
  }
}

int report_command(const RunConfig& cfg, std::ostream& out) {
  const auto reports = parse_inputs(cfg.inputs);
  emit_report(reports, cfg.out_dir);
  RunManifest manifest(cfg, "report");
  for (const char* f : {"report.json", "table.csv", "per_head.csv"}) manifest.add_output(f);
  manifest.write();
  print_table(reports, out);
  return kExitOk;
}

int dispatch(const std::string& command, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (command == "prepare-data") return prepare_data(cfg, out);
  if (command == "train") return cfg.train.float64 ? train_command<double>(cfg, out) : train_command<float>(cfg, out);
  if (command == "eval" || command == "select-head" || command == "profile-heads") {
    return cfg.train.float64 ? eval_command<double>(cfg, command, out) : eval_command<float>(cfg, command, out);
  }
  if (command == "report") return report_command(cfg, out);
  if (command == "reproduce") {
    const auto reports = reproduce(cfg, err);
    print_table(reports, out);
    out << "wrote " << (cfg.out_dir / "report.json").string() << '\n';
    return kExitOk;
  }
  throw ConfigError("command", "unknown subcommand '" + command + "'");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Vision transformer training with diverse attention heads", "vitdiv"};
  app.require_subcommand(1, 1);
  std::map<std::string, std::string> values;
  std::string config_path;
  std::map<std::string, CLI::App*> subcommands;
  for (const auto& c : kCommands) {
    auto* sc = app.add_subcommand(c.name, c.help);
    sc->add_option("--config", config_path, "Flat key = value config file");
    for (const auto& key : RunConfig::keys()) sc->add_option("--" + key, values[key]);
    subcommands[c.name] = sc;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  std::string command;
  for (const auto& [name, sc] : subcommands) {
    if (sc->parsed()) command = name;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.apply_file(config_path);
    cfg.apply_environment();
    const auto* sc = subcommands.at(command);
    for (const auto& key : RunConfig::keys()) {
      if (sc->count("--" + key) > 0) cfg.set(key, values.at(key));
    }
    cfg.validate();
    return dispatch(command, cfg, out, err);
  } catch (const ConfigError& e) {
    err << "error: invalid configuration: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace vitdiv::cli
