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

#include <cstdint>
#include <span>
#include <vector>

namespace vitdiv::data {

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarPixels = kCifarSide * kCifarSide;
inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * kCifarPixels;
inline constexpr std::uint8_t kCifarAutomobile = 1;
inline constexpr std::uint8_t kCifarTruck = 9;

/// Decoded CIFAR-10 binary batch. Images are stored per pixel: index
/// ((n * 32 + y) * 32 + x) * 3 + c, converted from the on-disk channel planes.
struct CifarBatch {
  std::size_t count = 0;
  std::vector<std::uint8_t> images;
  std::vector<std::uint8_t> labels;
};

/// Throws ParseError for a length that is not a multiple of 3073 bytes or a
/// label byte above 9.
CifarBatch parse_cifar10(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_cifar10(const CifarBatch& batch);

}  // namespace vitdiv::data
