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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vitdiv/model.hpp"

namespace vitdiv {

// Checkpoint container, version 1. All integers little-endian.
//
//   magic        4 bytes  "VDCK"
//   version      u32      1
//   meta_len     u32      length of the metadata block
//   meta         bytes    "key=value\n" lines (model config plus free-form keys)
//   dtype        u32      0 = float32, 1 = float64
//   count        u32      number of arrays
//   per array:
//     name_len   u32
//     name       bytes
//     rank       u32
//     dims       rank x u64
//     values     product(dims) x dtype, little-endian IEEE-754
//
// See docs/FORMATS.md.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointArray {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<double> values;  // widened; the on-disk dtype is kept separately
};

struct CheckpointContents {
  std::map<std::string, std::string> meta;
  bool float64 = false;
  std::vector<CheckpointArray> arrays;
};

std::vector<std::uint8_t> encode_checkpoint(const CheckpointContents& contents);
CheckpointContents decode_checkpoint(const std::vector<std::uint8_t>& bytes);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const VisionTransformer<T>& model,
                     const std::map<std::string, std::string>& extra_meta = {});

/// Loads a checkpoint at precision T regardless of the stored dtype.
template <typename T>
VisionTransformer<T> load_checkpoint(const std::filesystem::path& path,
                                     std::map<std::string, std::string>* meta_out = nullptr);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace vitdiv
