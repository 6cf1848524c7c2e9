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

inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;  // unsigned byte, 1 dim
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;  // unsigned byte, 3 dims

/// Unsigned-byte IDX array (the MNIST container): big-endian magic, one
/// big-endian u32 per dimension, then the row-major payload.
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::size_t count() const { return dims.empty() ? 0 : dims[0]; }
};

/// Throws ParseError (with byte offset) on bad magic or a payload whose length
/// disagrees with the header.
IdxArray parse_idx(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_idx(const IdxArray& array);

}  // namespace vitdiv::data
