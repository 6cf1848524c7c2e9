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

#include "vitdiv/error.hpp"

#include <sstream>

namespace vitdiv {

std::string shape_to_string(const std::vector<std::int64_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

std::string shape_message(const std::string& op,
                          const std::vector<std::int64_t>& lhs,
                          const std::vector<std::int64_t>& rhs,
                          const std::string& detail) {
  std::string msg = op + ": shape mismatch " + shape_to_string(lhs) + " vs " +
                    shape_to_string(rhs);
  if (!detail.empty()) msg += " (" + detail + ")";
  return msg;
}

}  // namespace

ShapeError::ShapeError(std::string op, std::vector<std::int64_t> lhs,
                       std::vector<std::int64_t> rhs, const std::string& detail)
    : Error(shape_message(op, lhs, rhs, detail)),
      op_(std::move(op)),
      lhs_(std::move(lhs)),
      rhs_(std::move(rhs)) {}

ParseError::ParseError(const std::string& what, std::size_t offset)
    : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
      offset_(offset) {}

ConfigError::ConfigError(std::string field, const std::string& reason)
    : Error(field + ": " + reason), field_(std::move(field)) {}

TrainingDiverged::TrainingDiverged(std::int64_t step, double loss)
    : Error("training diverged at step " + std::to_string(step) +
            " (loss = " + std::to_string(loss) + ")"),
      step_(step),
      loss_(loss) {}

}  // namespace vitdiv
