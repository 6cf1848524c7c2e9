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

#include "vitdiv/tensor.hpp"

// Differentiable primitives. Broadcasting never happens implicitly: binary
// elementwise ops require identical shapes, and the broadcast_axis /
// expand_leading / fill primitives make every broadcast explicit.
//
// Axis arguments accept negative values counting from the back.

namespace vitdiv::ad {

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T value);

template <typename T> Tensor<T> exp(const Tensor<T>& a);
template <typename T> Tensor<T> log(const Tensor<T>& a);
template <typename T> Tensor<T> sqrt(const Tensor<T>& a);
template <typename T> Tensor<T> square(const Tensor<T>& a);
template <typename T> Tensor<T> tanh(const Tensor<T>& a);
/// 1/a elementwise, with 0 mapped to 0 (and so is its derivative).
template <typename T> Tensor<T> safe_reciprocal(const Tensor<T>& a);

/// a: [..., m, k]. b: [k, n] shared across the leading dims of a, or
/// [..., k, n] with the same leading dims. Result: [..., m, n].
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// Swaps the last two axes.
template <typename T> Tensor<T> transpose(const Tensor<T>& a);
template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);

/// Softmax over the last axis.
template <typename T> Tensor<T> softmax(const Tensor<T>& a);

/// Sums out `axis` (the axis is removed).
template <typename T> Tensor<T> sum_axis(const Tensor<T>& a, std::int64_t axis);
/// Inserts a new axis at position `axis` with extent `extent`, repeating values.
template <typename T>
Tensor<T> broadcast_axis(const Tensor<T>& a, std::int64_t axis, std::int64_t extent);
/// Sums out the first `count` axes.
template <typename T> Tensor<T> sum_leading(const Tensor<T>& a, std::int64_t count);
/// Prepends axes `lead`, repeating values.
template <typename T> Tensor<T> expand_leading(const Tensor<T>& a, const Shape& lead);
/// Sum of all elements; shape {}.
template <typename T> Tensor<T> sum_all(const Tensor<T>& a);
/// Broadcasts a one-element tensor to `shape`.
template <typename T> Tensor<T> fill(const Tensor<T>& value, Shape shape);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::int64_t axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::int64_t axis, std::int64_t begin, std::int64_t length);
/// Zero-pads `a` along `axis` into an extent of `total`, placing it at `begin`.
template <typename T>
Tensor<T> pad(const Tensor<T>& a, std::int64_t axis, std::int64_t begin, std::int64_t total);

/// Embedding lookup: rows of table [V, D] selected by `rows` -> [rows.size(), D].
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::int64_t> rows);
/// Adjoint of gather_rows: accumulates rows of src [n, D] into a [table_rows, D] zero table.
template <typename T>
Tensor<T> scatter_rows(const Tensor<T>& src, std::span<const std::int64_t> rows,
                       std::int64_t table_rows);

// Composites built from the primitives above.

template <typename T> Tensor<T> neg(const Tensor<T>& a);
template <typename T> Tensor<T> mean_axis(const Tensor<T>& a, std::int64_t axis);
template <typename T> Tensor<T> mean_all(const Tensor<T>& a);
/// Adds `bias` (shape equal to the trailing dims of `a`) to every leading index.
template <typename T> Tensor<T> add_bias(const Tensor<T>& a, const Tensor<T>& bias);
/// tanh approximation of GELU.
template <typename T> Tensor<T> gelu(const Tensor<T>& a);
/// Normalizes over the last axis, then applies gamma/beta of shape [D].
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& a, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5));
/// Log-softmax over the last axis, shifted by the (constant) row maximum.
template <typename T> Tensor<T> log_softmax(const Tensor<T>& a);

template <typename T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T> Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }

}  // namespace vitdiv::ad
