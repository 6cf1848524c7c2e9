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

#include "vitdiv/cifar.hpp"

#include "vitdiv/error.hpp"

namespace vitdiv::data {

CifarBatch parse_cifar10(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw ParseError("CIFAR-10 batch length " + std::to_string(bytes.size()) +
                         " is not a multiple of " + std::to_string(kCifarRecordBytes),
                     bytes.size() - bytes.size() % kCifarRecordBytes);
  }
  CifarBatch out;
  out.count = bytes.size() / kCifarRecordBytes;
  out.labels.resize(out.count);
  out.images.resize(out.count * 3 * kCifarPixels);
  for (std::size_t n = 0; n < out.count; ++n) {
    const std::size_t base = n * kCifarRecordBytes;
    const std::uint8_t label = bytes[base];
    if (label > 9) {
      throw ParseError("CIFAR-10 label byte " + std::to_string(label) + " is outside [0, 9]", base);
    }
    out.labels[n] = label;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < kCifarPixels; ++p)
        out.images[(n * kCifarPixels + p) * 3 + c] = bytes[base + 1 + c * kCifarPixels + p];
  }
  return out;
}

std::vector<std::uint8_t> write_cifar10(const CifarBatch& batch) {
  if (batch.labels.size() != batch.count || batch.images.size() != batch.count * 3 * kCifarPixels) {
    throw Error("write_cifar10: inconsistent batch sizes");
  }
  std::vector<std::uint8_t> out(batch.count * kCifarRecordBytes);
  for (std::size_t n = 0; n < batch.count; ++n) {
    const std::size_t base = n * kCifarRecordBytes;
    out[base] = batch.labels[n];
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < kCifarPixels; ++p)
        out[base + 1 + c * kCifarPixels + p] = batch.images[(n * kCifarPixels + p) * 3 + c];
  }
  return out;
}

}  // namespace vitdiv::data
