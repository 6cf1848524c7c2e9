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

#include "vitdiv/tensor.hpp"

#include <algorithm>

namespace vitdiv::ad {

namespace {
thread_local bool t_grad_enabled = true;
thread_local bool t_strict_finite = false;
}  // namespace

bool grad_enabled() noexcept { return t_grad_enabled; }
void set_grad_enabled(bool enabled) noexcept { t_grad_enabled = enabled; }
bool strict_finite() noexcept { return t_strict_finite; }
void set_strict_finite(bool enabled) noexcept { t_strict_finite = enabled; }

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string_view op_name(OpKind kind) noexcept {
  switch (kind) {
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kScale: return "scale";
    case OpKind::kAddScalar: return "add_scalar";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSqrt: return "sqrt";
    case OpKind::kSquare: return "square";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSafeReciprocal: return "safe_reciprocal";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kReshape: return "reshape";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kSumAxis: return "sum_axis";
    case OpKind::kBroadcastAxis: return "broadcast_axis";
    case OpKind::kSumLeading: return "sum_leading";
    case OpKind::kExpandLeading: return "expand_leading";
    case OpKind::kSumAll: return "sum_all";
    case OpKind::kFill: return "fill";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kPad: return "pad";
    case OpKind::kGatherRows: return "gather_rows";
    case OpKind::kScatterRows: return "scatter_rows";
  }
  return "unknown";
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad) {
  for (auto d : shape) {
    if (d <= 0) throw ShapeError("tensor", shape, {}, "extents must be positive");
  }
  if (ad::numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("tensor", shape, {static_cast<std::int64_t>(values.size())},
                     "element count does not match shape");
  }
  impl_ = std::make_shared<Impl>();
  impl_->shape = std::move(shape);
  impl_->storage = std::make_shared<std::vector<T>>(std::move(values));
  impl_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  const auto n = static_cast<std::size_t>(ad::numel(shape));
  return Tensor(std::move(shape), std::vector<T>(n, T{0}), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const auto n = static_cast<std::size_t>(ad::numel(shape));
  return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<T>{value}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::make_result(Shape shape, std::vector<T> values, OpKind kind,
                                 std::vector<Tensor> inputs, typename Node<T>::Vjp vjp) {
  Tensor out(std::move(shape), std::move(values));
  if (!grad_enabled()) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  auto node = std::make_shared<Node<T>>();
  node->kind = kind;
  node->inputs = std::move(inputs);
  node->vjp = std::move(vjp);
  out.impl_->node = std::move(node);
  out.impl_->requires_grad = true;
  return out;
}

template <typename T>
const typename Tensor<T>::Impl& Tensor<T>::impl() const {
  if (!impl_) throw Error("use of an undefined tensor");
  return *impl_;
}

template <typename T>
typename Tensor<T>::Impl& Tensor<T>::impl() {
  if (!impl_) throw Error("use of an undefined tensor");
  return *impl_;
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  return impl().shape;
}

template <typename T>
std::int64_t Tensor<T>::dim(std::int64_t axis) const {
  const auto r = rank();
  const auto a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) throw ShapeError("dim", shape(), {axis}, "axis out of range");
  return shape()[static_cast<std::size_t>(a)];
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item", shape(), {}, "tensor is not a scalar");
  return (*impl().storage)[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool requires_grad) {
  if (!is_leaf()) throw Error("set_requires_grad: only leaf tensors can be changed");
  impl().requires_grad = requires_grad;
  return *this;
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  Tensor out;
  out.impl_ = std::make_shared<Impl>();
  out.impl_->shape = impl().shape;
  out.impl_->storage = impl().storage;
  return out;
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return Tensor(impl().shape, *impl().storage);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace vitdiv::ad
