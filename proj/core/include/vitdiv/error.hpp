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

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vitdiv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A primitive received operands whose shapes violate its shape rule.
class ShapeError : public Error {
 public:
  ShapeError(std::string op, std::vector<std::int64_t> lhs,
             std::vector<std::int64_t> rhs, const std::string& detail = {});

  const std::string& op() const noexcept { return op_; }
  const std::vector<std::int64_t>& lhs() const noexcept { return lhs_; }
  const std::vector<std::int64_t>& rhs() const noexcept { return rhs_; }

 private:
  std::string op_;
  std::vector<std::int64_t> lhs_;
  std::vector<std::int64_t> rhs_;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary input; `offset` is the byte position where decoding failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset);
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// A configuration field failed validation.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& reason);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Training loss exceeded the divergence bound or became non-finite.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::int64_t step, double loss);
  std::int64_t step() const noexcept { return step_; }
  double loss() const noexcept { return loss_; }

 private:
  std::int64_t step_;
  double loss_;
};

std::string shape_to_string(const std::vector<std::int64_t>& shape);

}  // namespace vitdiv
