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

#include <cmath>
#include <set>

#include "fake_data.hpp"
#include "oracles.hpp"
#include "vitdiv/cifar.hpp"
#include "vitdiv/datasets.hpp"
#include "vitdiv/error.hpp"
#include "vitdiv/idx.hpp"
#include "vitdiv/split_io.hpp"

namespace vitdiv::data {
namespace {

TEST(Idx, RoundTripAndHeaderLayout) {
  const auto images = testing::fake_mnist_images(3, 1);
  const auto bytes = write_idx(images);
  ASSERT_EQ(bytes.size(), 16u + 3u * 784u);
  EXPECT_EQ(bytes[2], 0x08);
  EXPECT_EQ(bytes[3], 0x03);
  EXPECT_EQ(bytes[7], 3);   // count, big-endian
  EXPECT_EQ(bytes[11], 28);
  const auto back = parse_idx(bytes);
  EXPECT_EQ(back.dims, images.dims);
  EXPECT_EQ(back.data, images.data);
  const auto labels = testing::fake_mnist_labels(5, 2);
  const auto lb = parse_idx(write_idx(labels));
  EXPECT_EQ(lb.count(), 5u);
  EXPECT_EQ(lb.data, labels.data);
}

TEST(Idx, MalformedInputs) {
  auto bytes = write_idx(testing::fake_mnist_labels(4, 1));
  auto bad = bytes;
  bad[2] = 0x0d;  // float element type
  EXPECT_THROW(parse_idx(bad), ParseError);
  auto shortened = bytes;
  shortened.pop_back();
  try {
    parse_idx(shortened);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GT(e.offset(), 0u);
  }
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_THROW(parse_idx(longer), ParseError);
  const std::vector<std::uint8_t> tiny = {0, 0, 8};
  EXPECT_THROW(parse_idx(tiny), ParseError);
  IdxArray inconsistent;
  inconsistent.dims = {2};
  inconsistent.data = {1};
  EXPECT_THROW(write_idx(inconsistent), Error);
}

TEST(Cifar, RoundTripAndPlaneLayout) {
  const auto batch = testing::fake_cifar_batch(4, 3);
  const auto bytes = write_cifar10(batch);
  ASSERT_EQ(bytes.size(), 4 * kCifarRecordBytes);
  // Record 2, channel 1, pixel (y=5, x=7).
  const std::size_t n = 2, c = 1, y = 5, x = 7;
  EXPECT_EQ(bytes[n * kCifarRecordBytes], batch.labels[n]);
  EXPECT_EQ(bytes[n * kCifarRecordBytes + 1 + c * kCifarPixels + y * 32 + x],
            batch.images[((n * 32 + y) * 32 + x) * 3 + c]);
  const auto back = parse_cifar10(bytes);
  EXPECT_EQ(back.count, 4u);
  EXPECT_EQ(back.images, batch.images);
  EXPECT_EQ(back.labels, batch.labels);
}

TEST(Cifar, MalformedInputs) {
  auto bytes = write_cifar10(testing::fake_cifar_batch(2, 4));
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(parse_cifar10(truncated), ParseError);
  auto bad_label = bytes;
  bad_label[kCifarRecordBytes] = 10;
  try {
    parse_cifar10(bad_label);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), kCifarRecordBytes);
  }
}

ImagePool make_pool(std::int64_t h, std::int64_t w, std::int64_t c, std::size_t count, std::uint32_t id_base,
                    std::uint8_t fill) {
  ImagePool p;
  p.height = h;
  p.width = w;
  p.channels = c;
  std::vector<std::uint8_t> img(static_cast<std::size_t>(h * w * c));
  for (std::size_t i = 0; i < count; ++i) {
    std::fill(img.begin(), img.end(), static_cast<std::uint8_t>(fill + i % 7));
    p.append(img, id_base + static_cast<std::uint32_t>(i));
  }
  return p;
}

SplitCounts small_counts() { return SplitCounts{200, 40, 40, 40, 40, 40}; }

TEST(Splits, PlannedGroupCounts) {
  const auto g = planned_group_counts(100, 0.9);
  EXPECT_EQ(g[0] + g[1] + g[2] + g[3], 100u);
  EXPECT_EQ(g[0], 45u);
  EXPECT_EQ(g[3], 45u);
  EXPECT_EQ(g[1], 5u);
  EXPECT_THROW(planned_group_counts(10, 1.5), ConfigError);
  EXPECT_DOUBLE_EQ(role_correlation(SplitRole::kOodTest, 0.9), 1.0 - 0.9);
  EXPECT_DOUBLE_EQ(role_correlation(SplitRole::kBalancedProbe, 0.9), 0.5);
  EXPECT_EQ(parse_role(role_name(SplitRole::kOodVal)), SplitRole::kOodVal);
  EXPECT_THROW(parse_role("validation"), ConfigError);
}

TEST(MnistCifar, CollagesFromPools) {
  const auto d0 = make_pool(28, 28, 1, 250, 0, 10), d1 = make_pool(28, 28, 1, 250, 1000, 100);
  const auto car = make_pool(32, 32, 3, 250, 0, 20), truck = make_pool(32, 32, 3, 250, 1000, 200);
  const auto splits = build_mnist_cifar(d0, d1, car, truck, 0.9, 5, small_counts());
  ASSERT_EQ(splits.size(), 6u);
  std::set<std::uint32_t> vehicles, digits;
  for (const auto& [role, s] : splits) {
    EXPECT_EQ(s.height, 64);
    EXPECT_EQ(s.width, 32);
    EXPECT_EQ(s.channels, 3);
    EXPECT_EQ(s.size(), small_counts().of(role));
    // Group counts follow the plan; the aligned fraction sits within 3 sigma of rho.
    const auto g = s.group_counts();
    EXPECT_EQ(g, planned_group_counts(s.size(), s.correlation));
    const double aligned = static_cast<double>(g[0] + g[3]) / static_cast<double>(s.size());
    const double sigma = std::sqrt(s.correlation * (1 - s.correlation) / static_cast<double>(s.size()));
    EXPECT_LE(std::abs(aligned - s.correlation), 3 * sigma + 1e-12);
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_TRUE(vehicles.insert(s.robust_source[i] + 100000u * s.labels[i]).second) << "vehicle reused";
      EXPECT_TRUE(digits.insert(s.spurious_source[i] + 100000u * s.spurious[i]).second) << "digit reused";
      const auto ex = s.example(i);
      // Top block: padded digit replicated over channels. Bottom: vehicle.
      EXPECT_EQ(ex.image[0], 0.0f);
      const float digit_px = ex.image[(2 * 32 + 2) * 3];
      EXPECT_EQ(digit_px, ex.image[(2 * 32 + 2) * 3 + 2]);
      const std::uint8_t digit_fill = s.spurious[i] == 0 ? 10 : 100;
      EXPECT_GE(digit_px * 255.0f + 0.5f, digit_fill);
      const std::uint8_t vehicle_fill = s.labels[i] == 0 ? 20 : 200;
      EXPECT_GE(ex.image[32 * 32 * 3] * 255.0f + 0.5f, vehicle_fill);
    }
  }
  EXPECT_EQ(splits.at(SplitRole::kOodVal).correlation, 1.0 - 0.9);
}

TEST(MnistCifar, DeterministicAndSeedSensitive) {
  const auto d0 = make_pool(28, 28, 1, 250, 0, 10), d1 = make_pool(28, 28, 1, 250, 1000, 100);
  const auto car = make_pool(32, 32, 3, 250, 0, 20), truck = make_pool(32, 32, 3, 250, 1000, 200);
  const auto a = build_mnist_cifar(d0, d1, car, truck, 0.9, 5, small_counts());
  const auto b = build_mnist_cifar(d0, d1, car, truck, 0.9, 5, small_counts());
  const auto c = build_mnist_cifar(d0, d1, car, truck, 0.9, 6, small_counts());
  EXPECT_EQ(a, b);
  EXPECT_NE(a.at(SplitRole::kTrain).robust_source, c.at(SplitRole::kTrain).robust_source);
}

TEST(MnistCifar, InsufficientPoolAndBadShapes) {
  const auto d0 = make_pool(28, 28, 1, 50, 0, 10), d1 = make_pool(28, 28, 1, 250, 1000, 100);
  const auto car = make_pool(32, 32, 3, 250, 0, 20), truck = make_pool(32, 32, 3, 250, 1000, 200);
  try {
    build_mnist_cifar(d0, d1, car, truck, 0.9, 5, small_counts());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("digit-0"), std::string::npos);
  }
  const auto wrong = make_pool(32, 32, 1, 250, 0, 10);
  EXPECT_THROW(build_mnist_cifar(wrong, d1, car, truck, 0.9, 5, small_counts()), ShapeError);
  EXPECT_THROW(build_mnist_cifar(d1, d1, car, truck, 1.2, 5, small_counts()), ConfigError);
}

TEST(MnistCifar, LoadsPoolsFromDisk) {
  const auto dir = testing::scratch_dir("pools");
  testing::write_fake_mnist_cifar(dir / "mnist", dir / "cifar", 300, 100, 9);
  const auto pools = load_mnist_cifar_pools(dir / "mnist", dir / "cifar");
  const auto labels = parse_idx(read_file(dir / "mnist" / "train-labels-idx1-ubyte"));
  const auto zeros = std::count(labels.data.begin(), labels.data.end(), 0);
  EXPECT_GE(pools.digit0.size(), static_cast<std::size_t>(zeros));
  EXPECT_GT(pools.car.size(), 0u);
  EXPECT_GT(pools.truck.size(), 0u);
  // The first digit-0 image matches the first zero-labelled training image.
  const auto images = parse_idx(read_file(dir / "mnist" / "train-images-idx3-ubyte"));
  const auto first = static_cast<std::size_t>(std::find(labels.data.begin(), labels.data.end(), 0) - labels.data.begin());
  EXPECT_EQ(pools.digit0.source_ids[0], first);
  EXPECT_TRUE(std::equal(pools.digit0.image(0).begin(), pools.digit0.image(0).end(),
                         images.data.begin() + static_cast<std::ptrdiff_t>(first * 784)));
  std::filesystem::remove(dir / "cifar" / "test_batch.bin");
  EXPECT_THROW(load_mnist_cifar_pools(dir / "mnist", dir / "cifar"), Error);
}

TEST(Synthetic, GroupsAndDeterminism) {
  SyntheticSpec spec;
  spec.counts = small_counts();
  const auto a = build_synthetic_spurious(spec, 0.9, 3);
  EXPECT_EQ(a, build_synthetic_spurious(spec, 0.9, 3));
  EXPECT_NE(a.at(SplitRole::kTrain).pixels, build_synthetic_spurious(spec, 0.9, 4).at(SplitRole::kTrain).pixels);
  for (const auto& [role, s] : a) {
    EXPECT_EQ(s.height, 2 * spec.size);
    EXPECT_EQ(s.group_counts(), planned_group_counts(s.size(), role_correlation(role, 0.9)));
  }
  SyntheticSpec bad = spec;
  bad.noise = -1;
  EXPECT_THROW(build_synthetic_spurious(bad, 0.9, 0), ConfigError);
}

TEST(Synthetic, AttributesAreLinearlyReadable) {
  // Correlating each half with the class templates recovers the attribute:
  // perfectly for the high-contrast spurious half, well above chance for the
  // noisy robust half.
  SyntheticSpec spec;
  spec.counts = small_counts();
  const auto s = build_synthetic_spurious(spec, 0.5, 1).at(SplitRole::kBalancedProbe);
  const auto side = spec.size;
  std::size_t spurious_ok = 0, robust_ok = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto img = s.example(i).image;
    double sp = 0, rb = 0;
    for (std::int64_t y = 0; y < side; ++y)
      for (std::int64_t x = 0; x < side; ++x) {
        // attr 1 has vertical stripes, attr 0 horizontal.
        sp += img[static_cast<std::size_t>(y * side + x)] * (((x % 2 == 0) ? 1.0 : -1.0) - ((y % 2 == 0) ? 1.0 : -1.0));
        const double t1 = ((x - y + 64) % 4) < 2 ? 1.0 : -1.0;
        const double t0 = ((x + y) % 4) < 2 ? 1.0 : -1.0;
        rb += img[static_cast<std::size_t>((y + side) * side + x)] * (t1 - t0);
      }
    spurious_ok += (sp > 0) == (s.spurious[i] == 1);
    robust_ok += (rb > 0) == (s.labels[i] == 1);
  }
  EXPECT_EQ(spurious_ok, s.size());
  EXPECT_GT(static_cast<double>(robust_ok) / static_cast<double>(s.size()), 0.8);
}

TEST(SplitIo, RoundTripAndCorruption) {
  SyntheticSpec spec;
  spec.counts = small_counts();
  const auto splits = build_synthetic_spurious(spec, 0.8, 2);
  const auto dir = testing::scratch_dir("splits");
  save_splits(dir, splits);
  EXPECT_EQ(load_splits(dir), splits);
  auto bytes = read_file(dir / "train.labels.u8");
  bytes.pop_back();
  write_file(dir / "train.labels.u8", bytes);
  EXPECT_THROW(load_splits(dir), ParseError);
  write_file(dir / "manifest.json", std::vector<std::uint8_t>{'{', 'x'});
  EXPECT_THROW(load_splits(dir), ParseError);
  EXPECT_THROW(load_splits(dir / "missing"), Error);
}

TEST(SplitAccess, ImagesAndTargets) {
  SyntheticSpec spec;
  spec.counts = small_counts();
  const auto s = build_synthetic_spurious(spec, 0.9, 0).at(SplitRole::kIdVal);
  const std::vector<std::size_t> idx = {3, 1};
  const auto t = s.images<double>(idx);
  EXPECT_EQ(t.shape(), (ad::Shape{2, 16, 8, 1}));
  EXPECT_EQ(t.data()[0], static_cast<double>(s.pixels[3 * s.image_size()]));
  EXPECT_EQ(s.targets(idx, false), (std::vector<std::uint8_t>{s.labels[3], s.labels[1]}));
  EXPECT_EQ(s.targets(idx, true), (std::vector<std::uint8_t>{s.spurious[3], s.spurious[1]}));
}

}  // namespace
}  // namespace vitdiv::data
