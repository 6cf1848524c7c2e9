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

#include "vitdiv/run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "vitdiv/error.hpp"

namespace vitdiv {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_double(std::string_view key, std::string_view text) {
  const auto s = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(std::string(key), "expected a number, got '" + s + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view key, std::string_view text) {
  const auto s = trim(text);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(std::string(key), "expected an integer, got '" + s + "'");
  }
  return v;
}

std::uint64_t parse_uint(std::string_view key, std::string_view text) {
  const auto v = parse_int(key, text);
  if (v < 0) throw ConfigError(std::string(key), "must be >= 0");
  return static_cast<std::uint64_t>(v);
}

bool parse_bool(std::string_view key, std::string_view text) {
  const auto s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(std::string(key), "expected true or false, got '" + s + "'");
}

std::vector<double> parse_list(std::string_view key, std::string_view text) {
  std::vector<double> out;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) out.push_back(parse_double(key, item));
  if (out.empty()) throw ConfigError(std::string(key), "must list at least one value");
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  return out;
}

std::string format_bool(bool v) { return v ? "true" : "false"; }

struct Field {
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename M>
Field int_field(M member) {
  return {[member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_int(k, v); },
          [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); }};
}

template <typename M>
Field uint_field(M member) {
  return {[member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_uint(k, v); },
          [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); }};
}

template <typename M>
Field double_field(M member) {
  return {[member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_double(k, v); },
          [member](const RunConfig& c) { return format_double(member(const_cast<RunConfig&>(c))); }};
}

template <typename M>
Field bool_field(M member) {
  return {[member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_bool(k, v); },
          [member](const RunConfig& c) { return format_bool(member(const_cast<RunConfig&>(c))); }};
}

template <typename M>
Field path_field(M member) {
  return {[member](RunConfig& c, std::string_view, std::string_view v) { member(c) = trim(v); },
          [member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)).string(); }};
}

using Table = std::vector<std::pair<std::string, Field>>;

const Table& fields() {
  static const Table table = [] {
    Table t;
    t.emplace_back("dataset", Field{[](RunConfig& c, std::string_view k, std::string_view v) {
                                      const auto s = trim(v);
                                      if (s == "mnist-cifar") c.dataset = DatasetKind::kMnistCifar;
                                      else if (s == "synthetic") c.dataset = DatasetKind::kSynthetic;
                                      else throw ConfigError(std::string(k), "expected mnist-cifar or synthetic, got '" + s + "'");
                                    },
                                    [](const RunConfig& c) { return std::string(dataset_name(c.dataset)); }});
    t.emplace_back("data_root", path_field([](RunConfig& c) -> auto& { return c.data_root; }));
    t.emplace_back("mnist_dir", path_field([](RunConfig& c) -> auto& { return c.mnist_dir; }));
    t.emplace_back("cifar_dir", path_field([](RunConfig& c) -> auto& { return c.cifar_dir; }));
    t.emplace_back("splits_dir", path_field([](RunConfig& c) -> auto& { return c.splits_dir; }));
    t.emplace_back("rho", double_field([](RunConfig& c) -> auto& { return c.rho; }));
    t.emplace_back("data_seed", uint_field([](RunConfig& c) -> auto& { return c.data_seed; }));
    t.emplace_back("train_count", int_field([](RunConfig& c) -> auto& { return c.train_count; }));
    t.emplace_back("val_count", int_field([](RunConfig& c) -> auto& { return c.val_count; }));
    t.emplace_back("test_count", int_field([](RunConfig& c) -> auto& { return c.test_count; }));
    t.emplace_back("probe_count", int_field([](RunConfig& c) -> auto& { return c.probe_count; }));
    t.emplace_back("synth_size", int_field([](RunConfig& c) -> auto& { return c.synthetic.size; }));
    t.emplace_back("synth_channels", int_field([](RunConfig& c) -> auto& { return c.synthetic.channels; }));
    t.emplace_back("synth_spurious", double_field([](RunConfig& c) -> auto& { return c.synthetic.spurious_strength; }));
    t.emplace_back("synth_robust", double_field([](RunConfig& c) -> auto& { return c.synthetic.robust_strength; }));
    t.emplace_back("synth_noise", double_field([](RunConfig& c) -> auto& { return c.synthetic.noise; }));
    t.emplace_back("patch_size", int_field([](RunConfig& c) -> auto& { return c.patch_size; }));
    t.emplace_back("dim", int_field([](RunConfig& c) -> auto& { return c.dim; }));
    t.emplace_back("heads", int_field([](RunConfig& c) -> auto& { return c.heads; }));
    t.emplace_back("layers", int_field([](RunConfig& c) -> auto& { return c.layers; }));
    t.emplace_back("mlp_hidden", int_field([](RunConfig& c) -> auto& { return c.mlp_hidden; }));
    t.emplace_back("residual", bool_field([](RunConfig& c) -> auto& { return c.use_residual; }));
    t.emplace_back("qkv_bias", bool_field([](RunConfig& c) -> auto& { return c.qkv_bias; }));
    t.emplace_back("regularized_layer", int_field([](RunConfig& c) -> auto& { return c.regularized_layer; }));
    t.emplace_back("lambda", double_field([](RunConfig& c) -> auto& { return c.train.lambda; }));
    t.emplace_back("learning_rate", double_field([](RunConfig& c) -> auto& { return c.train.learning_rate; }));
    t.emplace_back("beta1", double_field([](RunConfig& c) -> auto& { return c.train.beta1; }));
    t.emplace_back("beta2", double_field([](RunConfig& c) -> auto& { return c.train.beta2; }));
    t.emplace_back("adam_eps", double_field([](RunConfig& c) -> auto& { return c.train.adam_eps; }));
    t.emplace_back("epochs", int_field([](RunConfig& c) -> auto& { return c.train.epochs; }));
    t.emplace_back("batch_size", int_field([](RunConfig& c) -> auto& { return c.train.batch_size; }));
    t.emplace_back("eval_every", int_field([](RunConfig& c) -> auto& { return c.train.eval_every; }));
    t.emplace_back("precision", Field{[](RunConfig& c, std::string_view k, std::string_view v) {
                                        const auto s = trim(v);
                                        if (s == "float32") c.train.float64 = false;
                                        else if (s == "float64") c.train.float64 = true;
                                        else throw ConfigError(std::string(k), "expected float32 or float64, got '" + s + "'");
                                      },
                                      [](const RunConfig& c) { return std::string(c.train.float64 ? "float64" : "float32"); }});
    t.emplace_back("diversity_epsilon", double_field([](RunConfig& c) -> auto& { return c.train.diversity_epsilon; }));
    t.emplace_back("score", Field{[](RunConfig& c, std::string_view k, std::string_view v) {
                                    const auto s = trim(v);
                                    if (s == "logit") c.train.score = ScoreKind::kLogit;
                                    else if (s == "probability") c.train.score = ScoreKind::kProbability;
                                    else throw ConfigError(std::string(k), "expected logit or probability, got '" + s + "'");
                                  },
                                  [](const RunConfig& c) {
                                    return std::string(c.train.score == ScoreKind::kLogit ? "logit" : "probability");
                                  }});
    t.emplace_back("divergence_threshold", double_field([](RunConfig& c) -> auto& { return c.train.divergence_threshold; }));
    t.emplace_back("checkpoint_every", int_field([](RunConfig& c) -> auto& { return c.train.checkpoint_every; }));
    t.emplace_back("lambda_grid", Field{[](RunConfig& c, std::string_view k, std::string_view v) { c.lambda_grid = parse_list(k, v); },
                                        [](const RunConfig& c) { return format_list(c.lambda_grid); }});
    t.emplace_back("lr_grid", Field{[](RunConfig& c, std::string_view k, std::string_view v) { c.lr_grid = parse_list(k, v); },
                                    [](const RunConfig& c) { return format_list(c.lr_grid); }});
    t.emplace_back("grid", bool_field([](RunConfig& c) -> auto& { return c.grid; }));
    t.emplace_back("seed", uint_field([](RunConfig& c) -> auto& { return c.seed; }));
    t.emplace_back("seeds", int_field([](RunConfig& c) -> auto& { return c.seeds; }));
    t.emplace_back("out_dir", path_field([](RunConfig& c) -> auto& { return c.out_dir; }));
    t.emplace_back("checkpoint", path_field([](RunConfig& c) -> auto& { return c.checkpoint; }));
    t.emplace_back("inputs", Field{[](RunConfig& c, std::string_view, std::string_view v) { c.inputs = trim(v); },
                                   [](const RunConfig& c) { return c.inputs; }});
    return t;
  }();
  return table;
}

const Field& field(std::string_view key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return f;
  }
  throw ConfigError(std::string(key), "unknown configuration key");
}

}  // namespace

std::string_view dataset_name(DatasetKind kind) {
  return kind == DatasetKind::kMnistCifar ? "mnist-cifar" : "synthetic";
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return names;
}

void RunConfig::set(std::string_view key, std::string_view value) { field(key).set(*this, key, value); }

std::string RunConfig::get(std::string_view key) const { return field(key).get(*this); }

void RunConfig::apply_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config", "line " + std::to_string(lineno) + ": expected key = value");
    }
    set(trim(std::string_view(content).substr(0, eq)), std::string_view(content).substr(eq + 1));
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_text(buf.str());
}

void RunConfig::apply_environment() {
  if (const char* root = std::getenv(kDataRootEnv); root != nullptr && *root != '\0') data_root = root;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(*this) + "\n";
  return out;
}

void RunConfig::validate() const {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho", "must lie in [0, 1]");
  for (const auto& [name, value] : {std::pair{"train_count", train_count}, std::pair{"val_count", val_count},
                                    std::pair{"test_count", test_count}, std::pair{"probe_count", probe_count}}) {
    if (value < 0) throw ConfigError(name, "must be >= 0");
  }
  if (dataset == DatasetKind::kSynthetic) {
    if (synthetic.size < 1) throw ConfigError("synth_size", "must be >= 1");
    if (synthetic.channels < 1) throw ConfigError("synth_channels", "must be >= 1");
    if (synthetic.noise < 0.0) throw ConfigError("synth_noise", "must be >= 0");
  }
  if (seeds < 1) throw ConfigError("seeds", "must be >= 1");
  if (out_dir.empty()) throw ConfigError("out_dir", "must not be empty");
  for (double l : lambda_grid) {
    if (!(l >= 0.0)) throw ConfigError("lambda_grid", "entries must be >= 0");
  }
  for (double lr : lr_grid) {
    if (!(lr > 0.0)) throw ConfigError("lr_grid", "entries must be positive");
  }
  train.validate();
  model_config().validate();
  if (train.lambda > 0.0 && heads < 2) throw ConfigError("lambda", "the diversity penalty needs heads >= 2");
}

void RunConfig::validate_data_paths() const {
  validate();
  if (dataset != DatasetKind::kMnistCifar) return;
  if (!std::filesystem::is_directory(resolved_mnist_dir())) {
    throw ConfigError("mnist_dir", "directory not found: " + resolved_mnist_dir().string() +
                                       " (set data_root, mnist_dir or " + kDataRootEnv + ")");
  }
  if (!std::filesystem::is_directory(resolved_cifar_dir())) {
    throw ConfigError("cifar_dir", "directory not found: " + resolved_cifar_dir().string() +
                                       " (set data_root, cifar_dir or " + kDataRootEnv + ")");
  }
}

std::filesystem::path RunConfig::resolved_mnist_dir() const {
  return mnist_dir.empty() ? data_root / "mnist" : mnist_dir;
}

std::filesystem::path RunConfig::resolved_cifar_dir() const {
  return cifar_dir.empty() ? data_root / "cifar" : cifar_dir;
}

std::filesystem::path RunConfig::resolved_splits_dir() const {
  return splits_dir.empty() ? out_dir / "splits" : splits_dir;
}

std::filesystem::path RunConfig::resolved_checkpoint() const {
  return checkpoint.empty() ? out_dir / "model.ckpt" : checkpoint;
}

std::vector<std::uint64_t> RunConfig::seed_list() const {
  std::vector<std::uint64_t> out;
  for (std::int64_t k = 0; k < seeds; ++k) out.push_back(seed + static_cast<std::uint64_t>(k));
  return out;
}

data::SplitCounts RunConfig::split_counts() const {
  data::SplitCounts counts = dataset == DatasetKind::kSynthetic ? synthetic.counts : data::SplitCounts{};
  if (train_count > 0) counts.train = static_cast<std::size_t>(train_count);
  if (val_count > 0) counts.id_val = counts.ood_val = static_cast<std::size_t>(val_count);
  if (test_count > 0) counts.id_test = counts.ood_test = static_cast<std::size_t>(test_count);
  if (probe_count > 0) counts.probe = static_cast<std::size_t>(probe_count);
  return counts;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  if (dataset == DatasetKind::kMnistCifar) {
    m.image_height = 64;
    m.image_width = 32;
    m.channels = 3;
    m.patch_size = patch_size > 0 ? patch_size : 8;
  } else {
    m.image_height = 2 * synthetic.size;
    m.image_width = synthetic.size;
    m.channels = synthetic.channels;
    m.patch_size = patch_size > 0 ? patch_size : 4;
  }
  m.dim = dim;
  m.heads = heads;
  m.layers = layers;
  m.mlp_hidden = mlp_hidden;
  m.use_residual = use_residual;
  m.qkv_bias = qkv_bias;
  m.num_classes = 2;
  m.regularized_layer = regularized_layer;
  return m;
}

TrainConfig RunConfig::train_config(std::uint64_t run_seed) const {
  TrainConfig c = train;
  c.seed = run_seed;
  return c;
}

}  // namespace vitdiv
