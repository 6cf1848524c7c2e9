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

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fake_data.hpp"
#include "oracles.hpp"
#include "vitdiv_cli/cli.hpp"

namespace vitdiv {
namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> tiny(const std::filesystem::path& out, std::vector<std::string> extra = {}) {
  std::vector<std::string> args = {"--out_dir", out.string(), "--train_count", "120", "--val_count", "40",
                                   "--test_count", "40", "--probe_count", "40", "--epochs", "1",
                                   "--dim", "4", "--heads", "2"};
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

std::vector<std::string> with(std::string command, std::vector<std::string> rest) {
  rest.insert(rest.begin(), std::move(command));
  return rest;
}

TEST(Cli, HelpAndUsageErrors) {
  const auto help = run({"--help"});
  EXPECT_EQ(help.code, cli::kExitOk);
  for (const char* sc : {"prepare-data", "train", "eval", "select-head", "profile-heads", "report", "reproduce"}) {
    EXPECT_NE(help.out.find(sc), std::string::npos) << sc;
  }
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
  const auto unknown = run({"train", "--colour", "red"});
  EXPECT_EQ(unknown.code, cli::kExitUsage);
  EXPECT_NE(unknown.err.find("error:"), std::string::npos);
  EXPECT_EQ(run({"train", "--help"}).code, cli::kExitOk);
}

TEST(Cli, InvalidConfigurationNamesField) {
  const auto r = run({"train", "--dim", "zero"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("invalid configuration: dim"), std::string::npos) << r.err;
  const auto rho = run({"prepare-data", "--rho", "2"});
  EXPECT_NE(rho.err.find("rho"), std::string::npos);
  const auto dir = testing::scratch_dir("cli_missing");
  const auto missing = run({"prepare-data", "--dataset", "mnist-cifar", "--data_root", dir.string()});
  EXPECT_EQ(missing.code, cli::kExitUsage);
  EXPECT_NE(missing.err.find("mnist_dir"), std::string::npos) << missing.err;
  const auto no_ckpt = run(with("eval", tiny(dir / "none")));
  EXPECT_EQ(no_ckpt.code, cli::kExitFailure);
}

TEST(Cli, SubcommandPipeline) {
  const auto dir = testing::scratch_dir("cli_pipeline");
  const auto base = tiny(dir);
  auto r = run(with("prepare-data", base));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "splits" / "manifest.json"));
  EXPECT_NE(r.out.find("ood-val"), std::string::npos);

  r = run(with("train", tiny(dir, {"--lambda", "0.5"})));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "model.ckpt"));
  EXPECT_EQ(slurp(dir / "history.csv").substr(0, 14), "step,l_erm,l_d");
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["command"], "train");
  EXPECT_EQ(manifest["outputs"][0], "model.ckpt");
  EXPECT_NE(slurp(dir / "config.txt").find("lambda = 0.5"), std::string::npos);

  r = run(with("eval", base));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto eval = nlohmann::json::parse(slurp(dir / "eval.json"));
  EXPECT_DOUBLE_EQ(eval["lambda"].get<double>(), 0.5);

  r = run(with("select-head", base));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "selection.json"))["per_head_ood_val_acc"].size(), 2u);

  r = run(with("profile-heads", base));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir / "profile.csv").substr(0, 27), "head,robust_acc,spurious_ac");

  const auto ev = (dir / "eval.json").string();
  r = run({"report", "--out_dir", (dir / "report").string(), "--inputs", "Div=" + ev + ",Div+Sel=" + ev});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(slurp(dir / "report" / "report.json"));
  EXPECT_EQ(report["rows"][1]["selected"], true);
  EXPECT_EQ(run({"report", "--out_dir", dir.string(), "--inputs", "Div"}).code, cli::kExitUsage);
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  const auto dir = testing::scratch_dir("cli_config");
  {
    std::ofstream f(dir / "run.conf");
    f << "dim = 8\nheads = 2\nepochs = 1\ntrain_count = 64\nval_count = 20\ntest_count = 20\nprobe_count = 20\n"
      << "precision = float64\n";
  }
  const auto r = run({"train", "--config", (dir / "run.conf").string(), "--dim", "4", "--out_dir", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto snapshot = slurp(dir / "config.txt");
  EXPECT_NE(snapshot.find("dim = 4\n"), std::string::npos);
  EXPECT_NE(snapshot.find("heads = 2\n"), std::string::npos);
  EXPECT_NE(snapshot.find("precision = float64\n"), std::string::npos);
}

TEST(Cli, GridTrainReportsChoice) {
  const auto dir = testing::scratch_dir("cli_grid");
  const auto r = run(with("train", tiny(dir, {"--grid", "true", "--lambda_grid", "0,1", "--lr_grid", "1e-3"})));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("grid_select picked"), std::string::npos);
}

TEST(Cli, PrepareDataFromMnistCifarFiles) {
  const auto dir = testing::scratch_dir("cli_mnist_cifar");
  testing::write_fake_mnist_cifar(dir / "data" / "mnist", dir / "data" / "cifar", 400, 120, 3);
  const auto r = run({"prepare-data", "--dataset", "mnist-cifar", "--data_root", (dir / "data").string(),
                      "--out_dir", (dir / "run").string(), "--train_count", "40", "--val_count", "10",
                      "--test_count", "10", "--probe_count", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = nlohmann::json::parse(slurp(dir / "run" / "splits" / "manifest.json"));
  EXPECT_FALSE(m.empty());
}

TEST(Cli, ReproduceIsDeterministic) {
  const auto a = testing::scratch_dir("cli_repro_a");
  const auto b = testing::scratch_dir("cli_repro_b");
  const std::vector<std::string> grid = {"--lambda_grid", "0.5", "--lr_grid", "1e-3", "--seeds", "2"};
  auto ra = run(with("reproduce", tiny(a, grid)));
  auto rb = run(with("reproduce", tiny(b, grid)));
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(rb.code, 0) << rb.err;
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
  EXPECT_EQ(slurp(a / "table.csv"), slurp(b / "table.csv"));
  const auto report = nlohmann::json::parse(slurp(a / "report.json"));
  ASSERT_EQ(report["rows"].size(), 4u);
  EXPECT_EQ(report["rows"][3]["method"], "Div+Sel");
  EXPECT_EQ(report["rows"][0]["seeds"].size(), 2u);
}

}  // namespace
}  // namespace vitdiv
