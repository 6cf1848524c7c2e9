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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vitdiv/tensor.hpp"

namespace vitdiv::data {

enum class SplitRole { kTrain, kIdVal, kIdTest, kOodVal, kOodTest, kBalancedProbe };

std::string_view role_name(SplitRole role);
SplitRole parse_role(std::string_view name);
inline constexpr SplitRole kAllRoles[] = {SplitRole::kTrain,   SplitRole::kIdVal,
                                          SplitRole::kIdTest,  SplitRole::kOodVal,
                                          SplitRole::kOodTest, SplitRole::kBalancedProbe};

/// One collage: the spurious region stacked above the robust one.
struct CollageExample {
  std::span<const float> image;  // height x width x channels, values in [0, 1]
  std::uint8_t label = 0;        // robust class
  std::uint8_t spurious = 0;     // spurious attribute
  int group() const { return 2 * label + spurious; }
};

struct DatasetSplit {
  SplitRole role = SplitRole::kTrain;
  double correlation = 0.0;  // fraction of examples whose spurious attribute equals the label
  std::uint64_t seed = 0;
  std::int64_t height = 0, width = 0, channels = 0;
  std::vector<float> pixels;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> spurious;
  // Source indices of the images each example was assembled from.
  std::vector<std::uint32_t> robust_source;
  std::vector<std::uint32_t> spurious_source;

  std::size_t size() const { return labels.size(); }
  std::size_t image_size() const { return static_cast<std::size_t>(height * width * channels); }
  CollageExample example(std::size_t i) const;
  /// Counts indexed by group = 2 * label + spurious.
  std::array<std::size_t, 4> group_counts() const;

  /// Stacks the selected images into [B, H, W, C].
  template <typename T>
  ad::Tensor<T> images(std::span<const std::size_t> indices) const;
  /// Labels (or spurious attributes) of the selected examples.
  std::vector<std::uint8_t> targets(std::span<const std::size_t> indices, bool spurious_target) const;

  bool operator==(const DatasetSplit&) const = default;
};

using SplitMap = std::map<SplitRole, DatasetSplit>;

struct SplitCounts {
  std::size_t train = 10000;
  std::size_t id_val = 400;
  std::size_t id_test = 400;
  std::size_t ood_val = 400;
  std::size_t ood_test = 400;
  std::size_t probe = 400;

  std::size_t of(SplitRole role) const;
};

/// Same-class source images of one size.
struct ImagePool {
  std::int64_t height = 0, width = 0, channels = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint32_t> source_ids;

  std::size_t size() const { return source_ids.size(); }
  std::span<const std::uint8_t> image(std::size_t i) const;
  void append(std::span<const std::uint8_t> image, std::uint32_t source_id);
};

/// Correlation used for each role given the training correlation: train and
/// id splits use rho, ood splits 1 - rho, the balanced probe 0.5.
double role_correlation(SplitRole role, double train_rho);

/// Number of examples per group for a split of n examples at correlation rho:
/// labels are balanced (n/2 of label 1) and round(rho * class size) of each
/// class carry the matching spurious attribute. Indexed like group_counts().
std::array<std::size_t, 4> planned_group_counts(std::size_t n, double rho);

/// MNIST-CIFAR collages: a zero-padded 28x28 digit (0 or 1) replicated to
/// three channels above a 32x32 CIFAR car (label 0) or truck (label 1),
/// giving 64x32x3 images. Source images are drawn without replacement across
/// all splits. Throws if a pool runs out.
SplitMap build_mnist_cifar(const ImagePool& digit0, const ImagePool& digit1, const ImagePool& car,
                           const ImagePool& truck, double rho, std::uint64_t seed,
                           const SplitCounts& counts);

/// Reads train/t10k MNIST IDX files and CIFAR-10 binary batches from
/// `mnist_dir` / `cifar_dir` and sorts digits 0/1 and cars/trucks into pools.
struct MnistCifarPools {
  ImagePool digit0, digit1, car, truck;
};
MnistCifarPools load_mnist_cifar_pools(const std::filesystem::path& mnist_dir,
                                       const std::filesystem::path& cifar_dir);

/// Synthetic analogue of MNIST-CIFAR needing no external files. The top half
/// carries a high-contrast stripe orientation (spurious attribute); the bottom
/// half a fainter, noisier diagonal texture whose orientation is the label.
struct SyntheticSpec {
  std::int64_t size = 8;  // width; the image is 2*size tall
  std::int64_t channels = 1;
  double spurious_strength = 1.0;
  double robust_strength = 0.5;
  double noise = 0.25;
  SplitCounts counts{2000, 400, 400, 400, 400, 400};
};

SplitMap build_synthetic_spurious(const SyntheticSpec& spec, double rho, std::uint64_t seed);

}  // namespace vitdiv::data
