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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vitdiv/error.hpp"

namespace vitdiv::ad {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);

/// Primitive identifiers recorded on graph nodes.
enum class OpKind : std::uint8_t {
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kAddScalar,
  kExp,
  kLog,
  kSqrt,
  kSquare,
  kTanh,
  kSafeReciprocal,
  kMatmul,
  kTranspose,
  kReshape,
  kSoftmax,
  kSumAxis,
  kBroadcastAxis,
  kSumLeading,
  kExpandLeading,
  kSumAll,
  kFill,
  kConcat,
  kSlice,
  kPad,
  kGatherRows,
  kScatterRows,
};

std::string_view op_name(OpKind kind) noexcept;

// Grad mode is thread-local. When disabled, primitives never record nodes.
bool grad_enabled() noexcept;
void set_grad_enabled(bool enabled) noexcept;

class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled) noexcept : previous_(grad_enabled()) {
    set_grad_enabled(enabled);
  }
  ~GradModeGuard() { set_grad_enabled(previous_); }
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

class NoGradGuard : public GradModeGuard {
 public:
  NoGradGuard() noexcept : GradModeGuard(false) {}
};

// Strict-finite mode makes every primitive reject non-finite inputs.
bool strict_finite() noexcept;
void set_strict_finite(bool enabled) noexcept;

class StrictFiniteGuard {
 public:
  explicit StrictFiniteGuard(bool enabled = true) noexcept : previous_(strict_finite()) {
    set_strict_finite(enabled);
  }
  ~StrictFiniteGuard() { set_strict_finite(previous_); }
  StrictFiniteGuard(const StrictFiniteGuard&) = delete;
  StrictFiniteGuard& operator=(const StrictFiniteGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class Tensor;

/// A recorded primitive application. The VJP receives the node inputs, the
/// node's own output and the output cotangent, and returns one cotangent per
/// input (undefined for inputs that need none). VJPs are written with the
/// same primitives, so running them in grad mode records a differentiable
/// backward graph.
template <typename T>
struct Node {
  using Vjp = std::function<std::vector<Tensor<T>>(
      const std::vector<Tensor<T>>& inputs, const Tensor<T>& out,
      const Tensor<T>& grad_out)>;

  OpKind kind;
  std::vector<Tensor<T>> inputs;
  Vjp vjp;
};

/// Dense row-major array with shared, immutable-by-convention storage.
/// Copies are cheap handles onto the same value.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  /// Internal: builds a primitive result and records a node when grad mode is
  /// on and some input requires grad.
  static Tensor make_result(Shape shape, std::vector<T> values, OpKind kind,
                            std::vector<Tensor> inputs, typename Node<T>::Vjp vjp);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::int64_t rank() const { return static_cast<std::int64_t>(shape().size()); }
  /// Extent of axis `axis`; negative values count from the back.
  std::int64_t dim(std::int64_t axis) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(impl().storage->size()); }

  std::span<const T> data() const { return {impl().storage->data(), impl().storage->size()}; }
  /// In-place access for optimizers and finite-difference probes. Mutating a
  /// tensor that already feeds a recorded graph invalidates that graph.
  std::span<T> mutable_data() { return {impl().storage->data(), impl().storage->size()}; }
  T item() const;

  bool requires_grad() const noexcept { return impl_ && impl_->requires_grad; }
  /// Only valid on leaves (tensors without a recorded node).
  Tensor& set_requires_grad(bool requires_grad);
  bool is_leaf() const noexcept { return !impl_ || impl_->node == nullptr; }
  const std::shared_ptr<Node<T>>& node() const { return impl().node; }

  /// Same storage, no graph history, requires_grad = false.
  Tensor detach() const;
  /// Deep copy with no graph history.
  Tensor clone() const;

  /// Identity of the underlying value, stable across handle copies.
  const void* id() const noexcept { return impl_.get(); }

 private:
  struct Impl {
    Shape shape;
    std::shared_ptr<std::vector<T>> storage;
    bool requires_grad = false;
    std::shared_ptr<Node<T>> node;
  };

  const Impl& impl() const;
  Impl& impl();

  std::shared_ptr<Impl> impl_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

/// Converts values between precisions; the result is a detached leaf.
template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& x) {
  std::vector<To> out(x.data().begin(), x.data().end());
  return Tensor<To>(x.shape(), std::move(out));
}

}  // namespace vitdiv::ad
