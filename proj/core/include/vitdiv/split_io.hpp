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

#include <filesystem>

#include "vitdiv/datasets.hpp"

namespace vitdiv::data {

/// Writes `manifest.json` plus one set of raw little-endian blobs per split:
///   <role>.images.f32        count x H x W x C float32
///   <role>.labels.u8         count bytes
///   <role>.spurious.u8       count bytes
///   <role>.robust_src.u32    count x uint32
///   <role>.spurious_src.u32  count x uint32
/// Layout documented in docs/FORMATS.md.
void save_splits(const std::filesystem::path& dir, const SplitMap& splits);
SplitMap load_splits(const std::filesystem::path& dir);

}  // namespace vitdiv::data
