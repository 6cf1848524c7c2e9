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

#include "vitdiv/idx.hpp"

#include <sstream>

#include "vitdiv/error.hpp"

namespace vitdiv::data {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (bytes.size() < offset + 4) {
    throw ParseError("IDX header truncated: need " + std::to_string(offset + 4) + " bytes, have " +
                         std::to_string(bytes.size()),
                     bytes.size());
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kIdxLabelMagic && magic != kIdxImageMagic) {
    std::ostringstream msg;
    msg << "bad IDX magic 0x" << std::hex << magic << " (expected 0x801 or 0x803)";
    throw ParseError(msg.str(), 0);
  }
  const std::size_t rank = magic & 0xff;
  IdxArray out;
  std::uint64_t expected = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    out.dims.push_back(read_be32(bytes, 4 + 4 * i));
    expected *= out.dims.back();
  }
  const std::size_t header = 4 + 4 * rank;
  const std::uint64_t actual = bytes.size() - header;
  if (actual != expected) {
    throw ParseError("IDX payload length mismatch: expected " + std::to_string(expected) +
                         " bytes, got " + std::to_string(actual),
                     header);
  }
  out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return out;
}

std::vector<std::uint8_t> write_idx(const IdxArray& array) {
  if (array.dims.size() != 1 && array.dims.size() != 3) {
    throw Error("write_idx: only 1-d label and 3-d image arrays are supported");
  }
  std::uint64_t expected = 1;
  for (auto d : array.dims) expected *= d;
  if (expected != array.data.size()) throw Error("write_idx: payload does not match dims");
  std::vector<std::uint8_t> out;
  write_be32(out, array.dims.size() == 1 ? kIdxLabelMagic : kIdxImageMagic);
  for (auto d : array.dims) write_be32(out, d);
  out.insert(out.end(), array.data.begin(), array.data.end());
  return out;
}

}  // namespace vitdiv::data
