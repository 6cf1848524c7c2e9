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

#include "vitdiv/split_io.hpp"

#include <bit>
#include <fstream>

#include <json.hpp>

#include "vitdiv/checkpoint.hpp"
#include "vitdiv/error.hpp"

namespace vitdiv::data {

namespace {

using json = nlohmann::json;

constexpr const char* kFormat = "vitdiv-splits";
constexpr int kVersion = 1;

template <typename U>
std::vector<std::uint8_t> to_le_bytes(std::span<const U> values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * sizeof(U));
  for (U v : values) {
    std::uint32_t bits;
    if constexpr (std::is_same_v<U, float>) bits = std::bit_cast<std::uint32_t>(v);
    else bits = static_cast<std::uint32_t>(v);
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
  }
  return out;
}

template <typename U>
std::vector<U> from_le_bytes(const std::vector<std::uint8_t>& bytes, std::size_t count,
                             const std::string& file) {
  if (bytes.size() != count * 4) {
    throw ParseError(file + ": expected " + std::to_string(count * 4) + " bytes, got " +
                         std::to_string(bytes.size()),
                     0);
  }
  std::vector<U> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= std::uint32_t{bytes[i * 4 + static_cast<std::size_t>(k)]} << (8 * k);
    if constexpr (std::is_same_v<U, float>) out[i] = std::bit_cast<float>(bits);
    else out[i] = static_cast<U>(bits);
  }
  return out;
}

}  // namespace

void save_splits(const std::filesystem::path& dir, const SplitMap& splits) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format"] = kFormat;
  manifest["version"] = kVersion;
  manifest["splits"] = json::array();
  for (const auto& [role, split] : splits) {
    const std::string name(role_name(role));
    json entry;
    entry["role"] = name;
    entry["count"] = split.size();
    entry["correlation"] = split.correlation;
    entry["seed"] = split.seed;
    entry["height"] = split.height;
    entry["width"] = split.width;
    entry["channels"] = split.channels;
    entry["images"] = name + ".images.f32";
    entry["labels"] = name + ".labels.u8";
    entry["spurious"] = name + ".spurious.u8";
    entry["robust_source"] = name + ".robust_src.u32";
    entry["spurious_source"] = name + ".spurious_src.u32";
    const auto groups = split.group_counts();
    entry["group_counts"] = groups;
    write_file(dir / entry["images"].get<std::string>(), to_le_bytes(std::span<const float>(split.pixels)));
    write_file(dir / entry["labels"].get<std::string>(), split.labels);
    write_file(dir / entry["spurious"].get<std::string>(), split.spurious);
    write_file(dir / entry["robust_source"].get<std::string>(),
               to_le_bytes(std::span<const std::uint32_t>(split.robust_source)));
    write_file(dir / entry["spurious_source"].get<std::string>(),
               to_le_bytes(std::span<const std::uint32_t>(split.spurious_source)));
    manifest["splits"].push_back(entry);
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

SplitMap load_splits(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
  if (manifest.value("format", "") != kFormat || manifest.value("version", 0) != kVersion) {
    throw ParseError(path.string() + ": not a version-1 split manifest", 0);
  }
  SplitMap out;
  for (const auto& entry : manifest.at("splits")) {
    DatasetSplit split;
    split.role = parse_role(entry.at("role").get<std::string>());
    split.correlation = entry.at("correlation").get<double>();
    split.seed = entry.at("seed").get<std::uint64_t>();
    split.height = entry.at("height").get<std::int64_t>();
    split.width = entry.at("width").get<std::int64_t>();
    split.channels = entry.at("channels").get<std::int64_t>();
    const auto count = entry.at("count").get<std::size_t>();
    const auto images_file = entry.at("images").get<std::string>();
    split.pixels = from_le_bytes<float>(read_file(dir / images_file), count * split.image_size(), images_file);
    split.labels = read_file(dir / entry.at("labels").get<std::string>());
    split.spurious = read_file(dir / entry.at("spurious").get<std::string>());
    if (split.labels.size() != count || split.spurious.size() != count) {
      throw ParseError(path.string() + ": label blob sizes disagree with count", 0);
    }
    const auto rs = entry.at("robust_source").get<std::string>();
    const auto ss = entry.at("spurious_source").get<std::string>();
    split.robust_source = from_le_bytes<std::uint32_t>(read_file(dir / rs), count, rs);
    split.spurious_source = from_le_bytes<std::uint32_t>(read_file(dir / ss), count, ss);
    out.emplace(split.role, std::move(split));
  }
  return out;
}

}  // namespace vitdiv::data
