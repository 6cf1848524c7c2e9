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

#include "vitdiv/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace vitdiv::ad {

namespace {

template <typename T>
using Grads = std::vector<Tensor<T>>;

std::int64_t normalize_axis(const char* op, const Shape& shape, std::int64_t axis,
                            bool inclusive_end = false) {
  const auto r = static_cast<std::int64_t>(shape.size()) + (inclusive_end ? 1 : 0);
  const auto a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) throw ShapeError(op, shape, {axis}, "axis out of range");
  return a;
}

// Views a shape as [outer, extent, inner] around `axis`.
struct AxisSplit {
  std::int64_t outer = 1;
  std::int64_t extent = 1;
  std::int64_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::int64_t axis) {
  AxisSplit s;
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(shape.size()); ++i) {
    const auto d = shape[static_cast<std::size_t>(i)];
    if (i < axis) s.outer *= d;
    else if (i == axis) s.extent = d;
    else s.inner *= d;
  }
  return s;
}

template <typename T>
void check_finite(const char* op, const Tensor<T>& t) {
  if (!strict_finite()) return;
  for (T v : t.data()) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite input value under strict-finite mode");
    }
  }
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError(op, a.shape(), b.shape());
}

template <typename T, typename F>
std::vector<T> map_values(const Tensor<T>& a, F f) {
  std::vector<T> out(a.data().size());
  std::transform(a.data().begin(), a.data().end(), out.begin(), f);
  return out;
}

template <typename T, typename F>
std::vector<T> zip_values(const Tensor<T>& a, const Tensor<T>& b, F f) {
  std::vector<T> out(a.data().size());
  std::transform(a.data().begin(), a.data().end(), b.data().begin(), out.begin(), f);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  check_finite("add", a);
  check_finite("add", b);
  return Tensor<T>::make_result(
      a.shape(), zip_values(a, b, [](T x, T y) { return x + y; }), OpKind::kAdd, {a, b},
      [](const Grads<T>&, const Tensor<T>&, const Tensor<T>& g) { return Grads<T>{g, g}; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  check_finite("sub", a);
  check_finite("sub", b);
  return Tensor<T>::make_result(
      a.shape(), zip_values(a, b, [](T x, T y) { return x - y; }), OpKind::kSub, {a, b},
      [](const Grads<T>& in, const Tensor<T>&, const Tensor<T>& g) {
        return Grads<T>{g, in[1].requires_grad() ? neg(g) : Tensor<T>{}};
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  check_finite("mul", a);
  check_finite("mul", b);
  return Tensor<T>::make_result(
      a.shape(), zip_values(a, b, [](T x, T y) { return x * y; }), OpKind::kMul, {a, b},
      [](const Grads<T>& in, const Tensor<T>&, const Tensor<T>& g) {
        return Grads<T>{in[0].requires_grad() ? mul(g, in[1]) : Tensor<T>{},
                        in[1].requires_grad() ? mul(g, in[0]) : Tensor<T>{}};
      });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("div", a, b);
  check_finite("div", a);
  check_finite("div", b);
  return Tensor<T>::make_result(
      a.shape(), zip_values(a, b, [](T x, T y) { return x / y; }), OpKind::kDiv, {a, b},
      [](const Grads<T>& in, const Tensor<T>&, const Tensor<T>& g) {
        Tensor<T> da, db;
        if (in[0].requires_grad()) da = div(g, in[1]);
        if (in[1].requires_grad()) db = neg(div(mul(g, in[0]), square(in[1])));
        return Grads<T>{da, db};
      });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  check_finite("scale", a);
  return Tensor<T>::make_result(
      a.shape(), map_values(a, [factor](T x) { return x * factor; }), OpKind::kScale, {a},
      [factor](const Grads<T>&, const Tensor<T>&, const Tensor<T>& g) {
        return Grads<T>{scale(g, factor)};
      });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value) {
  check_finite("add_scalar", a);
  return Tensor<T>::make_result(
      a.shape(), map_values(a, [value](T x) { return x + value; }), OpKind::kAddScalar, {a},
      [](const Grads<T>&, const Tensor<T>&, const Tensor<T>& g) { return Grads<T>{g}; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  check_finite("exp", a);
  return Tensor<T>::make_result(
      a.shape(), map_values(a, [](T x) { return std::exp(x); }), OpKind::kExp, {a},
      [](const Grads<T>&, const Tensor<T>& out, const Tensor<T>& g) {
        return Grads<T>{mul(g, out)};
      });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  check_finite("log", a);
  return Tensor<T>::make_result(
      a.shape(), map_values(a, [](T x) { return std::log(x); }), OpKind::kLog, {a},
      [](const Grads<T>& in, const Tensor<T>&, const Tensor<T>& g) {
        return Grads<T>{div(g, in[0])};
      });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& a) {
  check_finite("sqrt", a);
  return Tensor<T>::make_result(
      a.shape(), map_values(a, [](T x) { return std::sqrt(x); }), OpKind::kSqrt, {a},
      [](const Grads<T>&, const Tensor<T>& out, const Tensor<T>& g) {
        // d sqrt(a) = 1 / (2 sqrt(a)); zero at a = 0 (subgradient choice).
        return Grads<T>{scale(mul(g, safe_reciprocal(out)), T(0.5))};
      });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  check_finite("square", a);
  return Tensor<T>::make_result(
      a.shape(), map_values(a, [](T x) { return x * x; }), OpKind::kSquare, {a},
      [](const Grads<T>& in, const Tensor<T>&, const Tensor<T>& g) {
        return Grads<T>{scale(mul(g, in[0]), T(2))};
      });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
  check_finite("tanh", a);
  return Tensor<T>::make_result(
      a.shape(), map_values(a, [](T x) { return std::tanh(x); }), OpKind::kTanh, {a},
      [](const Grads<T>&, const Tensor<T>& out, const Tensor<T>& g) {
        return Grads<T>{mul(g, add_scalar(neg(square(out)), T(1)))};
      });
}

template <typename T>
Tensor<T> safe_reciprocal(const Tensor<T>& a) {
  check_finite("safe_reciprocal", a);
  return Tensor<T>::make_result(
      a.shape(), map_values(a, [](T x) { return x == T(0) ? T(0) : T(1) / x; }),
      OpKind::kSafeReciprocal, {a},
      [](const Grads<T>&, const Tensor<T>& out, const Tensor<T>& g) {
        return Grads<T>{neg(mul(g, square(out)))};
      });
}

// ---------------------------------------------------------------------------
// Linear algebra and shape

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  check_finite("matmul", a);
  check_finite("matmul", b);
  if (a.rank() < 2 || b.rank() < 2) {
    throw ShapeError("matmul", a.shape(), b.shape(), "operands need rank >= 2");
  }
  const bool shared = b.rank() == 2;
  if (!shared) {
    if (b.rank() != a.rank() ||
        !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin())) {
      throw ShapeError("matmul", a.shape(), b.shape(), "leading dims differ");
    }
  }
  const auto m = a.dim(-2), k = a.dim(-1), n = b.dim(-1);
  if (b.dim(-2) != k) throw ShapeError("matmul", a.shape(), b.shape(), "inner dims differ");

  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(n);
  const auto batch = numel(a.shape()) / (m * k);
  std::vector<T> out(static_cast<std::size_t>(batch * m * n), T(0));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* pc = out.data();
  for (std::int64_t bi = 0; bi < batch; ++bi) {
    const T* A = pa + bi * m * k;
    const T* B = shared ? pb : pb + bi * k * n;
    T* C = pc + bi * m * n;
    for (std::int64_t i = 0; i < m; ++i) {
      T* crow = C + i * n;
      for (std::int64_t p = 0; p < k; ++p) {
        const T av = A[i * k + p];
        const T* brow = B + p * n;
        for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
  return Tensor<T>::make_result(
      std::move(out_shape), std::move(out), OpKind::kMatmul, {a, b},
      [shared](const Grads<T>& in, const Tensor<T>&, const Tensor<T>& g) {
        const Tensor<T>& a = in[0];
        const Tensor<T>& b = in[1];
        Tensor<T> da, db;
        if (a.requires_grad()) da = matmul(g, transpose(b));
        if (b.requires_grad()) {
          if (shared) {
            const auto k = a.dim(-1), n = g.dim(-1);
            const auto rows = numel(a.shape()) / k;
            db = matmul(transpose(reshape(a, {rows, k})), reshape(g, {rows, n}));
          } else {
            db = matmul(transpose(a), g);
          }
        }
        return Grads<T>{da, db};
      });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  check_finite("transpose", a);
  if (a.rank() < 2) throw ShapeError("transpose", a.shape(), {}, "rank must be >= 2");
  const auto m = a.dim(-2), n = a.dim(-1);
  const auto batch = a.numel() / (m * n);
  Shape out_shape = a.shape();
  std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
  std::vector<T> out(a.data().size());
  const T* src = a.data().data();
  for (std::int64_t bi = 0; bi < batch; ++bi) {
    const T* s = src + bi * m * n;
    T* d = out.data() + bi * m * n;
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < n; ++j) d[j * m + i] = s[i * n + j];
  }
  return Tensor<T>::make_result(
      std::move(out_shape), std::move(out), OpKind::kTranspose, {a},
      [](const Grads<T>&, const Tensor<T>&, const Tensor<T>& g) {
        return Grads<T>{transpose(g)};
      });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  check_finite("reshape", a);
  if (numel(shape) != a.numel()) throw ShapeError("reshape", a.shape(), shape);
  std::vector<T> out(a.data().begin(), a.data().end());
  return Tensor<T>::make_result(
      std::move(shape), std::move(out), OpKind::kReshape, {a},
      [](const Grads<T>& in, const Tensor<T>&, const Tensor<T>& g) {
        return Grads<T>{reshape(g, in[0].shape())};
      });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& a) {
  check_finite("softmax", a);
  if (a.rank() < 1) throw ShapeError("softmax", a.shape(), {}, "rank must be >= 1");
  const auto n = a.dim(-1);
  const auto rows = a.numel() / n;
  std::vector<T> out(a.data().size());
  const T* src = a.data().data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* x = src + r * n;
    T* y = out.data() + r * n;
    T mx = x[0];
    for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    T total = 0;
    for (std::int64_t j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - mx);
      total += y[j];
    }
    for (std::int64_t j = 0; j < n; ++j) y[j] /= total;
  }
  return Tensor<T>::make_result(
      a.shape(), std::move(out), OpKind::kSoftmax, {a},
      [](const Grads<T>&, const Tensor<T>& y, const Tensor<T>& g) {
        // y * (g - <g, y>) per row.
        const auto n = y.dim(-1);
        const Tensor<T> inner = broadcast_axis(sum_axis(mul(g, y), -1), -1, n);
        return Grads<T>{mul(y, sub(g, inner))};
      });
}

// ---------------------------------------------------------------------------
// Reductions and broadcasts

template <typename T>
Tensor<T> sum_axis(const Tensor<T>& a, std::int64_t axis) {
  check_finite("sum_axis", a);
  const auto ax = normalize_axis("sum_axis", a.shape(), axis);
  const auto s = split_at(a.shape(), ax);
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + ax);
  std::vector<T> out(static_cast<std::size_t>(s.outer * s.inner), T(0));
  const T* src = a.data().data();
  for (std::int64_t o = 0; o < s.outer; ++o)
    for (std::int64_t e = 0; e < s.extent; ++e) {
      const T* row = src + (o * s.extent + e) * s.inner;
      T* dst = out.data() + o * s.inner;
      for (std::int64_t i = 0; i < s.inner; ++i) dst[i] += row[i];
    }
  const auto extent = s.extent;
  return Tensor<T>::make_result(
      std::move(out_shape), std::move(out), OpKind::kSumAxis, {a},
      [ax, extent](const Grads<T>&, const Tensor<T>&, const Tensor<T>& g) {
        return Grads<T>{broadcast_axis(g, ax, extent)};
      });
}

template <typename T>
Tensor<T> broadcast_axis(const Tensor<T>& a, std::int64_t axis, std::int64_t extent) {
  check_finite("broadcast_axis", a);
  if (extent <= 0) throw ShapeError("broadcast_axis", a.shape(), {extent}, "extent must be positive");
  const auto ax = normalize_axis("broadcast_axis", a.shape(), axis, /*inclusive_end=*/true);
  Shape out_shape = a.shape();
  out_shape.insert(out_shape.begin() + ax, extent);
  const auto s = split_at(out_shape, ax);
  std::vector<T> out(static_cast<std::size_t>(s.outer * s.extent * s.inner));
  const T* src = a.data().data();
  for (std::int64_t o = 0; o < s.outer; ++o)
    for (std::int64_t e = 0; e < s.extent; ++e)
      std::copy_n(src + o * s.inner, s.inner, out.data() + (o * s.extent + e) * s.inner);
  return Tensor<T>::make_result(
      std::move(out_shape), std::move(out), OpKind::kBroadcastAxis, {a},
      [ax](const Grads<T>&, const Tensor<T>&, const Tensor<T>& g) {
        return Grads<T>{sum_axis(g, ax)};
      });
}

template <typename T>
Tensor<T> sum_leading(const Tensor<T>& a, std::int64_t count) {
  check_finite("sum_leading", a);
  if (count < 0 || count > a.rank()) {
    throw ShapeError("sum_leading", a.shape(), {count}, "bad leading axis count");
  }
  Shape lead(a.shape().begin(), a.shape().begin() + count);
  Shape out_shape(a.shape().begin() + count, a.shape().end());
  const auto outer = numel(lead);
  const auto inner = numel(out_shape);
  std::vector<T> out(static_cast<std::size_t>(inner), T(0));
  const T* src = a.data().data();
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t i = 0; i < inner; ++i) out[static_cast<std::size_t>(i)] += src[o * inner + i];
  return Tensor<T>::make_result(
      std::move(out_shape), std::move(out), OpKind::kSumLeading, {a},
      [lead](const Grads<T>&, const Tensor<T>&, const Tensor<T>& g) {
        return Grads<T>{expand_leading(g, lead)};
      });
}

template <typename T>
Tensor<T> expand_leading(const Tensor<T>& a, const Shape& lead) {
  check_finite("expand_leading", a);
  for (auto d : lead) {
    if (d <= 0) throw ShapeError("expand_leading", a.shape(), lead, "extents must be positive");
  }
  Shape out_shape = lead;
  out_shape.insert(out_shape.end(), a.shape().begin(), a.shape().end());
  const auto outer = numel(lead);
  const auto inner = a.numel();
  std::vector<T> out(static_cast<std::size_t>(outer * inner));
  for (std::int64_t o = 0; o < outer; ++o)
    std::copy(a.data().begin(), a.data().end(), out.begin() + o * inner);
  const auto count = static_cast<std::int64_t>(lead.size());
  return Tensor<T>::make_result(
      std::move(out_shape), std::move(out), OpKind::kExpandLeading, {a},
      [count](const Grads<T>&, const Tensor<T>&, const Tensor<T>& g) {
        return Grads<T>{sum_leading(g, count)};
      });
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  check_finite("sum_all", a);
  T total = 0;
  for (T v : a.data()) total += v;
  return Tensor<T>::make_result(
      Shape{}, std::vector<T>{total}, OpKind::kSumAll, {a},
      [](const Grads<T>& in, const Tensor<T>&, const Tensor<T>& g) {
        return Grads<T>{fill(g, in[0].shape())};
      });
}

template <typename T>
Tensor<T> fill(const Tensor<T>& value, Shape shape) {
  check_finite("fill", value);
  if (value.numel() != 1) throw ShapeError("fill", value.shape(), shape, "value must have one element");
  const auto n = static_cast<std::size_t>(numel(shape));
  return Tensor<T>::make_result(
      std::move(shape), std::vector<T>(n, value.data()[0]), OpKind::kFill, {value},
      [](const Grads<T>& in, const Tensor<T>&, const Tensor<T>& g) {
        return Grads<T>{reshape(sum_all(g), in[0].shape())};
      });
}

// ---------------------------------------------------------------------------
// Concatenate / slice / pad

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::int64_t axis) {
  if (parts.empty()) throw ShapeError("concat", {}, {}, "no inputs");
  const auto ax = normalize_axis("concat", parts[0].shape(), axis);
  Shape out_shape = parts[0].shape();
  std::int64_t total = 0;
  for (const auto& p : parts) {
    check_finite("concat", p);
    Shape expect = parts[0].shape();
    if (p.rank() != static_cast<std::int64_t>(expect.size())) {
      throw ShapeError("concat", parts[0].shape(), p.shape(), "rank differs");
    }
    expect[static_cast<std::size_t>(ax)] = p.shape()[static_cast<std::size_t>(ax)];
    if (p.shape() != expect) throw ShapeError("concat", parts[0].shape(), p.shape());
    total += p.shape()[static_cast<std::size_t>(ax)];
  }
  out_shape[static_cast<std::size_t>(ax)] = total;
  const auto s = split_at(out_shape, ax);
  std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
  std::vector<std::int64_t> offsets;
  std::vector<std::int64_t> lengths;
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    const auto len = p.shape()[static_cast<std::size_t>(ax)];
    const T* src = p.data().data();
    for (std::int64_t o = 0; o < s.outer; ++o)
      std::copy_n(src + o * len * s.inner, len * s.inner,
                  out.data() + (o * total + offset) * s.inner);
    offsets.push_back(offset);
    lengths.push_back(len);
    offset += len;
  }
  return Tensor<T>::make_result(
      std::move(out_shape), std::move(out), OpKind::kConcat, parts,
      [ax, offsets, lengths](const Grads<T>& in, const Tensor<T>&, const Tensor<T>& g) {
        Grads<T> grads(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) {
          if (in[i].requires_grad()) grads[i] = slice(g, ax, offsets[i], lengths[i]);
        }
        return grads;
      });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::int64_t axis, std::int64_t begin, std::int64_t length) {
  check_finite("slice", a);
  const auto ax = normalize_axis("slice", a.shape(), axis);
  const auto s = split_at(a.shape(), ax);
  if (begin < 0 || length <= 0 || begin + length > s.extent) {
    throw ShapeError("slice", a.shape(), {begin, length}, "range out of bounds");
  }
  Shape out_shape = a.shape();
  out_shape[static_cast<std::size_t>(ax)] = length;
  std::vector<T> out(static_cast<std::size_t>(s.outer * length * s.inner));
  const T* src = a.data().data();
  for (std::int64_t o = 0; o < s.outer; ++o)
    std::copy_n(src + (o * s.extent + begin) * s.inner, length * s.inner,
                out.data() + o * length * s.inner);
  const auto extent = s.extent;
  return Tensor<T>::make_result(
      std::move(out_shape), std::move(out), OpKind::kSlice, {a},
      [ax, begin, extent](const Grads<T>&, const Tensor<T>&, const Tensor<T>& g) {
        return Grads<T>{pad(g, ax, begin, extent)};
      });
}

template <typename T>
Tensor<T> pad(const Tensor<T>& a, std::int64_t axis, std::int64_t begin, std::int64_t total) {
  check_finite("pad", a);
  const auto ax = normalize_axis("pad", a.shape(), axis);
  const auto s = split_at(a.shape(), ax);
  if (begin < 0 || begin + s.extent > total) {
    throw ShapeError("pad", a.shape(), {begin, total}, "range out of bounds");
  }
  Shape out_shape = a.shape();
  out_shape[static_cast<std::size_t>(ax)] = total;
  std::vector<T> out(static_cast<std::size_t>(s.outer * total * s.inner), T(0));
  const T* src = a.data().data();
  for (std::int64_t o = 0; o < s.outer; ++o)
    std::copy_n(src + o * s.extent * s.inner, s.extent * s.inner,
                out.data() + (o * total + begin) * s.inner);
  const auto length = s.extent;
  return Tensor<T>::make_result(
      std::move(out_shape), std::move(out), OpKind::kPad, {a},
      [ax, begin, length](const Grads<T>&, const Tensor<T>&, const Tensor<T>& g) {
        return Grads<T>{slice(g, ax, begin, length)};
      });
}

// ---------------------------------------------------------------------------
// Embedding lookup

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const std::int64_t> rows) {
  check_finite("gather_rows", table);
  if (table.rank() != 2) throw ShapeError("gather_rows", table.shape(), {}, "table must be rank 2");
  const auto v = table.dim(0), d = table.dim(1);
  if (rows.empty()) throw ShapeError("gather_rows", table.shape(), {0}, "no rows requested");
  std::vector<T> out(rows.size() * static_cast<std::size_t>(d));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= v) {
      throw ShapeError("gather_rows", table.shape(), {rows[r]}, "row index out of range");
    }
    std::copy_n(table.data().data() + rows[r] * d, d, out.data() + r * d);
  }
  std::vector<std::int64_t> idx(rows.begin(), rows.end());
  return Tensor<T>::make_result(
      Shape{static_cast<std::int64_t>(rows.size()), d}, std::move(out), OpKind::kGatherRows,
      {table}, [idx, v](const Grads<T>&, const Tensor<T>&, const Tensor<T>& g) {
        return Grads<T>{scatter_rows(g, std::span<const std::int64_t>(idx), v)};
      });
}

template <typename T>
Tensor<T> scatter_rows(const Tensor<T>& src, std::span<const std::int64_t> rows,
                       std::int64_t table_rows) {
  check_finite("scatter_rows", src);
  if (src.rank() != 2 || src.dim(0) != static_cast<std::int64_t>(rows.size())) {
    throw ShapeError("scatter_rows", src.shape(), {static_cast<std::int64_t>(rows.size())},
                     "source rows must match index count");
  }
  const auto d = src.dim(1);
  std::vector<T> out(static_cast<std::size_t>(table_rows * d), T(0));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= table_rows) {
      throw ShapeError("scatter_rows", src.shape(), {rows[r]}, "row index out of range");
    }
    const T* s = src.data().data() + r * d;
    T* dst = out.data() + rows[r] * d;
    for (std::int64_t j = 0; j < d; ++j) dst[j] += s[j];
  }
  std::vector<std::int64_t> idx(rows.begin(), rows.end());
  return Tensor<T>::make_result(
      Shape{table_rows, d}, std::move(out), OpKind::kScatterRows, {src},
      [idx](const Grads<T>&, const Tensor<T>&, const Tensor<T>& g) {
        return Grads<T>{gather_rows(g, std::span<const std::int64_t>(idx))};
      });
}

// ---------------------------------------------------------------------------
// Composites

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return scale(a, T(-1));
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& a, std::int64_t axis) {
  const auto n = a.dim(axis);
  return scale(sum_axis(a, axis), T(1) / static_cast<T>(n));
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  return scale(sum_all(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& a, const Tensor<T>& bias) {
  const auto lead_rank = a.rank() - bias.rank();
  if (lead_rank < 0 || !std::equal(bias.shape().begin(), bias.shape().end(),
                                   a.shape().begin() + lead_rank)) {
    throw ShapeError("add_bias", a.shape(), bias.shape(), "bias must match trailing dims");
  }
  if (lead_rank == 0) return add(a, bias);
  Shape lead(a.shape().begin(), a.shape().begin() + lead_rank);
  return add(a, expand_leading(bias, lead));
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  const T c = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  const Tensor<T> cube = mul(square(a), a);
  const Tensor<T> inner = scale(add(a, scale(cube, T(0.044715))), c);
  return scale(mul(a, add_scalar(tanh(inner), T(1))), T(0.5));
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& a, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const auto d = a.dim(-1);
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    throw ShapeError("layer_norm", a.shape(), gamma.shape(), "gamma/beta must be [D]");
  }
  const Tensor<T> mu = broadcast_axis(mean_axis(a, -1), -1, d);
  const Tensor<T> centered = sub(a, mu);
  const Tensor<T> var = mean_axis(square(centered), -1);
  const Tensor<T> denom = broadcast_axis(sqrt(add_scalar(var, eps)), -1, d);
  const Tensor<T> normed = div(centered, denom);
  return add_bias(mul(normed, expand_leading(gamma, Shape(a.shape().begin(), a.shape().end() - 1))),
                  beta);
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& a) {
  const auto n = a.dim(-1);
  const auto rows = a.numel() / n;
  Shape row_shape(a.shape().begin(), a.shape().end() - 1);
  std::vector<T> maxima(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* x = a.data().data() + r * n;
    maxima[static_cast<std::size_t>(r)] = *std::max_element(x, x + n);
  }
  Tensor<T> shift = row_shape.empty() ? Tensor<T>::scalar(maxima[0])
                                      : Tensor<T>(row_shape, std::move(maxima));
  const Tensor<T> z = sub(a, broadcast_axis(shift, -1, n));
  const Tensor<T> lse = log(sum_axis(exp(z), -1));
  return sub(z, broadcast_axis(lse, -1, n));
}

#define VITDIV_INSTANTIATE_OPS(T)                                                         \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> scale(const Tensor<T>&, T);                                          \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                     \
  template Tensor<T> exp(const Tensor<T>&);                                               \
  template Tensor<T> log(const Tensor<T>&);                                               \
  template Tensor<T> sqrt(const Tensor<T>&);                                              \
  template Tensor<T> square(const Tensor<T>&);                                            \
  template Tensor<T> tanh(const Tensor<T>&);                                              \
  template Tensor<T> safe_reciprocal(const Tensor<T>&);                                   \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> transpose(const Tensor<T>&);                                         \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                    \
  template Tensor<T> softmax(const Tensor<T>&);                                           \
  template Tensor<T> sum_axis(const Tensor<T>&, std::int64_t);                            \
  template Tensor<T> broadcast_axis(const Tensor<T>&, std::int64_t, std::int64_t);        \
  template Tensor<T> sum_leading(const Tensor<T>&, std::int64_t);                         \
  template Tensor<T> expand_leading(const Tensor<T>&, const Shape&);                      \
  template Tensor<T> sum_all(const Tensor<T>&);                                           \
  template Tensor<T> fill(const Tensor<T>&, Shape);                                       \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::int64_t);                 \
  template Tensor<T> slice(const Tensor<T>&, std::int64_t, std::int64_t, std::int64_t);   \
  template Tensor<T> pad(const Tensor<T>&, std::int64_t, std::int64_t, std::int64_t);     \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::int64_t>);        \
  template Tensor<T> scatter_rows(const Tensor<T>&, std::span<const std::int64_t>,        \
                                  std::int64_t);                                          \
  template Tensor<T> neg(const Tensor<T>&);                                               \
  template Tensor<T> mean_axis(const Tensor<T>&, std::int64_t);                           \
  template Tensor<T> mean_all(const Tensor<T>&);                                          \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> gelu(const Tensor<T>&);                                              \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T); \
  template Tensor<T> log_softmax(const Tensor<T>&);

VITDIV_INSTANTIATE_OPS(float)
VITDIV_INSTANTIATE_OPS(double)

}  // namespace vitdiv::ad
