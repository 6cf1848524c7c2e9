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

#include "vitdiv/datasets.hpp"

#include <algorithm>
#include <cmath>

#include "vitdiv/checkpoint.hpp"
#include "vitdiv/cifar.hpp"
#include "vitdiv/error.hpp"
#include "vitdiv/idx.hpp"
#include "vitdiv/rng.hpp"

namespace vitdiv::data {

std::string_view role_name(SplitRole role) {
  switch (role) {
    case SplitRole::kTrain: return "train";
    case SplitRole::kIdVal: return "id-val";
    case SplitRole::kIdTest: return "id-test";
    case SplitRole::kOodVal: return "ood-val";
    case SplitRole::kOodTest: return "ood-test";
    case SplitRole::kBalancedProbe: return "balanced-probe";
  }
  return "unknown";
}

SplitRole parse_role(std::string_view name) {
  for (SplitRole r : kAllRoles) {
    if (role_name(r) == name) return r;
  }
  throw ConfigError("role", "unknown split role '" + std::string(name) + "'");
}

CollageExample DatasetSplit::example(std::size_t i) const {
  const auto n = image_size();
  return {std::span<const float>(pixels).subspan(i * n, n), labels.at(i), spurious.at(i)};
}

std::array<std::size_t, 4> DatasetSplit::group_counts() const {
  std::array<std::size_t, 4> counts{};
  for (std::size_t i = 0; i < size(); ++i) ++counts[static_cast<std::size_t>(2 * labels[i] + spurious[i])];
  return counts;
}

template <typename T>
ad::Tensor<T> DatasetSplit::images(std::span<const std::size_t> indices) const {
  const auto n = image_size();
  std::vector<T> out(indices.size() * n);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const float* src = pixels.data() + indices[k] * n;
    std::copy(src, src + n, out.begin() + static_cast<std::ptrdiff_t>(k * n));
  }
  return ad::Tensor<T>({static_cast<std::int64_t>(indices.size()), height, width, channels},
                       std::move(out));
}

template ad::Tensor<float> DatasetSplit::images(std::span<const std::size_t>) const;
template ad::Tensor<double> DatasetSplit::images(std::span<const std::size_t>) const;

std::vector<std::uint8_t> DatasetSplit::targets(std::span<const std::size_t> indices,
                                                bool spurious_target) const {
  std::vector<std::uint8_t> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(spurious_target ? spurious.at(i) : labels.at(i));
  return out;
}

std::size_t SplitCounts::of(SplitRole role) const {
  switch (role) {
    case SplitRole::kTrain: return train;
    case SplitRole::kIdVal: return id_val;
    case SplitRole::kIdTest: return id_test;
    case SplitRole::kOodVal: return ood_val;
    case SplitRole::kOodTest: return ood_test;
    case SplitRole::kBalancedProbe: return probe;
  }
  return 0;
}

std::span<const std::uint8_t> ImagePool::image(std::size_t i) const {
  const auto n = static_cast<std::size_t>(height * width * channels);
  return std::span<const std::uint8_t>(pixels).subspan(i * n, n);
}

void ImagePool::append(std::span<const std::uint8_t> image, std::uint32_t source_id) {
  if (image.size() != static_cast<std::size_t>(height * width * channels)) {
    throw ShapeError("ImagePool::append", {height, width, channels},
                     {static_cast<std::int64_t>(image.size())});
  }
  pixels.insert(pixels.end(), image.begin(), image.end());
  source_ids.push_back(source_id);
}

double role_correlation(SplitRole role, double train_rho) {
  switch (role) {
    case SplitRole::kTrain:
    case SplitRole::kIdVal:
    case SplitRole::kIdTest: return train_rho;
    case SplitRole::kOodVal:
    case SplitRole::kOodTest: return 1.0 - train_rho;
    case SplitRole::kBalancedProbe: return 0.5;
  }
  return train_rho;
}

std::array<std::size_t, 4> planned_group_counts(std::size_t n, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho", "must lie in [0, 1]");
  const std::size_t n1 = n / 2;
  const std::size_t n0 = n - n1;
  const auto aligned0 = static_cast<std::size_t>(std::llround(rho * static_cast<double>(n0)));
  const auto aligned1 = static_cast<std::size_t>(std::llround(rho * static_cast<double>(n1)));
  // group = 2 * label + spurious
  return {aligned0, n0 - aligned0, n1 - aligned1, aligned1};
}

namespace {

// Shuffled list of (label, spurious) pairs realizing the planned counts.
std::vector<std::pair<std::uint8_t, std::uint8_t>> plan_examples(std::size_t n, double rho,
                                                                 CounterRng& rng) {
  const auto groups = planned_group_counts(n, rho);
  std::vector<std::pair<std::uint8_t, std::uint8_t>> plan;
  plan.reserve(n);
  for (std::uint8_t g = 0; g < 4; ++g) {
    for (std::size_t k = 0; k < groups[g]; ++k) {
      plan.emplace_back(static_cast<std::uint8_t>(g / 2), static_cast<std::uint8_t>(g % 2));
    }
  }
  rng.shuffle(std::span(plan));
  return plan;
}

// Draws pool entries sequentially from a seeded permutation.
class PoolCursor {
 public:
  PoolCursor(const ImagePool& pool, std::string name, std::uint64_t seed, std::uint64_t stream)
      : pool_(pool), name_(std::move(name)), order_(pool.size()) {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    CounterRng rng(seed, stream);
    rng.shuffle(std::span(order_));
  }

  std::size_t remaining() const { return order_.size() - next_; }
  const std::string& name() const { return name_; }
  std::size_t take() { return order_.at(next_++); }
  const ImagePool& pool() const { return pool_; }

 private:
  const ImagePool& pool_;
  std::string name_;
  std::vector<std::size_t> order_;
  std::size_t next_ = 0;
};

void check_pool(const ImagePool& pool, std::int64_t h, std::int64_t w, std::int64_t c,
                const char* name) {
  if (pool.height != h || pool.width != w || pool.channels != c) {
    throw ShapeError(std::string("build_mnist_cifar ") + name, {pool.height, pool.width, pool.channels},
                     {h, w, c});
  }
}

}  // namespace

SplitMap build_mnist_cifar(const ImagePool& digit0, const ImagePool& digit1, const ImagePool& car,
                           const ImagePool& truck, double rho, std::uint64_t seed,
                           const SplitCounts& counts) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho", "must lie in [0, 1]");
  check_pool(digit0, 28, 28, 1, "digit0");
  check_pool(digit1, 28, 28, 1, "digit1");
  check_pool(car, 32, 32, 3, "car");
  check_pool(truck, 32, 32, 3, "truck");

  // Verify every pool covers all splits before building anything.
  std::array<std::size_t, 4> need{};  // digit0, digit1, car, truck
  for (SplitRole role : kAllRoles) {
    const auto g = planned_group_counts(counts.of(role), role_correlation(role, rho));
    need[0] += g[0] + g[2];
    need[1] += g[1] + g[3];
    need[2] += g[0] + g[1];
    need[3] += g[2] + g[3];
  }
  const ImagePool* pools[4] = {&digit0, &digit1, &car, &truck};
  const char* names[4] = {"digit-0", "digit-1", "car", "truck"};
  for (std::size_t k = 0; k < 4; ++k) {
    if (need[k] > pools[k]->size()) {
      throw ConfigError("counts", std::string("insufficient source pool: need ") + std::to_string(need[k]) +
                                      " " + names[k] + " images, have " +
                                      std::to_string(pools[k]->size()));
    }
  }

  PoolCursor digits[2] = {PoolCursor(digit0, "digit-0", seed, 1), PoolCursor(digit1, "digit-1", seed, 2)};
  PoolCursor vehicles[2] = {PoolCursor(car, "car", seed, 3), PoolCursor(truck, "truck", seed, 4)};

  constexpr std::int64_t kHeight = 64, kWidth = 32, kChannels = 3;
  SplitMap out;
  std::uint64_t stream = 100;
  for (SplitRole role : kAllRoles) {
    const std::size_t n = counts.of(role);
    const double split_rho = role_correlation(role, rho);
    CounterRng rng(seed, stream++);
    DatasetSplit split;
    split.role = role;
    split.correlation = split_rho;
    split.seed = seed;
    split.height = kHeight;
    split.width = kWidth;
    split.channels = kChannels;
    split.pixels.assign(n * kHeight * kWidth * kChannels, 0.0f);
    const auto plan = plan_examples(n, split_rho, rng);
    for (std::size_t i = 0; i < n; ++i) {
      const auto [label, attr] = plan[i];
      PoolCursor& dc = digits[attr];
      PoolCursor& vc = vehicles[label];
      const std::size_t di = dc.take();
      const std::size_t vi = vc.take();
      float* img = split.pixels.data() + i * kHeight * kWidth * kChannels;
      const auto digit = dc.pool().image(di);
      // Digit: 28x28 zero-padded by 2 on every side into the top 32x32 block.
      for (std::int64_t y = 0; y < 28; ++y)
        for (std::int64_t x = 0; x < 28; ++x) {
          const float v = static_cast<float>(digit[static_cast<std::size_t>(y * 28 + x)]) / 255.0f;
          for (std::int64_t c = 0; c < kChannels; ++c) img[((y + 2) * kWidth + (x + 2)) * kChannels + c] = v;
        }
      const auto vehicle = vc.pool().image(vi);
      for (std::int64_t p = 0; p < 32 * 32 * kChannels; ++p) {
        img[32 * kWidth * kChannels + p] = static_cast<float>(vehicle[static_cast<std::size_t>(p)]) / 255.0f;
      }
      split.labels.push_back(label);
      split.spurious.push_back(attr);
      split.robust_source.push_back(vc.pool().source_ids[vi]);
      split.spurious_source.push_back(dc.pool().source_ids[di]);
    }
    out.emplace(role, std::move(split));
  }
  return out;
}

MnistCifarPools load_mnist_cifar_pools(const std::filesystem::path& mnist_dir,
                                       const std::filesystem::path& cifar_dir) {
  MnistCifarPools pools;
  for (ImagePool* p : {&pools.digit0, &pools.digit1}) {
    p->height = 28;
    p->width = 28;
    p->channels = 1;
  }
  for (ImagePool* p : {&pools.car, &pools.truck}) {
    p->height = 32;
    p->width = 32;
    p->channels = 3;
  }

  struct MnistFiles {
    const char* images;
    const char* labels;
    std::uint32_t id_base;
  };
  for (const MnistFiles& f : {MnistFiles{"train-images-idx3-ubyte", "train-labels-idx1-ubyte", 0},
                              MnistFiles{"t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", 60000}}) {
    const auto images = parse_idx(read_file(mnist_dir / f.images));
    const auto labels = parse_idx(read_file(mnist_dir / f.labels));
    if (images.dims.size() != 3 || images.dims[1] != 28 || images.dims[2] != 28 ||
        labels.dims.size() != 1 || labels.dims[0] != images.dims[0]) {
      throw ParseError(std::string("unexpected MNIST dims in ") + f.images, 4);
    }
    for (std::size_t i = 0; i < labels.data.size(); ++i) {
      const auto img = std::span<const std::uint8_t>(images.data).subspan(i * 784, 784);
      const auto id = f.id_base + static_cast<std::uint32_t>(i);
      if (labels.data[i] == 0) pools.digit0.append(img, id);
      else if (labels.data[i] == 1) pools.digit1.append(img, id);
    }
  }

  std::vector<std::pair<std::string, std::uint32_t>> batches;
  for (int k = 1; k <= 5; ++k) batches.emplace_back("data_batch_" + std::to_string(k) + ".bin", (k - 1) * 10000);
  batches.emplace_back("test_batch.bin", 50000);
  for (const auto& [name, id_base] : batches) {
    const auto batch = parse_cifar10(read_file(cifar_dir / name));
    for (std::size_t i = 0; i < batch.count; ++i) {
      const auto img = std::span<const std::uint8_t>(batch.images).subspan(i * 3 * kCifarPixels, 3 * kCifarPixels);
      const auto id = id_base + static_cast<std::uint32_t>(i);
      if (batch.labels[i] == kCifarAutomobile) pools.car.append(img, id);
      else if (batch.labels[i] == kCifarTruck) pools.truck.append(img, id);
    }
  }
  return pools;
}

// ---------------------------------------------------------------------------
// Synthetic analogue

namespace {

// +1 / -1 stripe patterns over a size x size region.
double spurious_pattern(std::uint8_t attr, std::int64_t y, std::int64_t x) {
  return attr == 0 ? ((y % 2 == 0) ? 1.0 : -1.0) : ((x % 2 == 0) ? 1.0 : -1.0);
}

double robust_pattern(std::uint8_t label, std::int64_t y, std::int64_t x) {
  const std::int64_t phase = label == 0 ? (x + y) : (x - y + 64);
  return (phase % 4) < 2 ? 1.0 : -1.0;
}

}  // namespace

SplitMap build_synthetic_spurious(const SyntheticSpec& spec, double rho, std::uint64_t seed) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho", "must lie in [0, 1]");
  if (spec.size < 1) throw ConfigError("synth_size", "must be >= 1");
  if (spec.channels < 1) throw ConfigError("channels", "must be >= 1");
  if (spec.noise < 0.0) throw ConfigError("synth_noise", "must be >= 0");
  const std::int64_t side = spec.size;
  const std::int64_t height = 2 * side;
  const std::int64_t channels = spec.channels;
  SplitMap out;
  std::uint64_t stream = 100;
  std::uint32_t next_source = 0;
  for (SplitRole role : kAllRoles) {
    const std::size_t n = spec.counts.of(role);
    const double split_rho = role_correlation(role, rho);
    CounterRng plan_rng(seed, stream++);
    CounterRng pixel_rng(seed, stream++);
    DatasetSplit split;
    split.role = role;
    split.correlation = split_rho;
    split.seed = seed;
    split.height = height;
    split.width = side;
    split.channels = channels;
    split.pixels.resize(n * static_cast<std::size_t>(height * side * channels));
    const auto plan = plan_examples(n, split_rho, plan_rng);
    for (std::size_t i = 0; i < n; ++i) {
      const auto [label, attr] = plan[i];
      float* img = split.pixels.data() + i * static_cast<std::size_t>(height * side * channels);
      for (std::int64_t y = 0; y < height; ++y)
        for (std::int64_t x = 0; x < side; ++x) {
          const bool top = y < side;
          const double pattern = top ? spurious_pattern(attr, y, x) : robust_pattern(label, y - side, x);
          const double strength = top ? spec.spurious_strength : spec.robust_strength;
          for (std::int64_t c = 0; c < channels; ++c) {
            const double v = 0.5 + 0.5 * strength * pattern + spec.noise * pixel_rng.normal();
            img[(y * side + x) * channels + c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
          }
        }
      split.labels.push_back(label);
      split.spurious.push_back(attr);
      split.robust_source.push_back(next_source);
      split.spurious_source.push_back(next_source);
      ++next_source;
    }
    out.emplace(role, std::move(split));
  }
  return out;
}

}  // namespace vitdiv::data
