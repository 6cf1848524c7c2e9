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

#include <string>
#include <vector>

#include "vitdiv/tensor.hpp"

namespace vitdiv::ad {

struct GradOptions {
  /// Record the backward computation so the returned gradients are
  /// differentiable again.
  bool create_graph = false;
  /// When false, a wrt tensor that requires grad but is unreachable from the
  /// outputs raises an error instead of yielding zeros.
  bool allow_unused = true;
};

/// Vector-Jacobian product: sum_k <cotangents[k], d outputs[k] / d wrt[j]>
/// for every j. Each returned tensor has the shape of its wrt tensor.
/// wrt tensors with requires_grad = false get zeros plus a warning entry.
template <typename T>
std::vector<Tensor<T>> vjp(const std::vector<Tensor<T>>& outputs,
                           const std::vector<Tensor<T>>& cotangents,
                           const std::vector<Tensor<T>>& wrt, GradOptions options = {});

/// Gradient of a one-element `output` with respect to each of `wrt`.
template <typename T>
std::vector<Tensor<T>> grad(const Tensor<T>& output, const std::vector<Tensor<T>>& wrt,
                            GradOptions options = {});

/// Diagnostics raised by the engine on this thread since the last call.
std::vector<std::string> take_warnings();

extern template std::vector<Tensor<float>> vjp(const std::vector<Tensor<float>>&,
                                               const std::vector<Tensor<float>>&,
                                               const std::vector<Tensor<float>>&, GradOptions);
extern template std::vector<Tensor<double>> vjp(const std::vector<Tensor<double>>&,
                                                const std::vector<Tensor<double>>&,
                                                const std::vector<Tensor<double>>&, GradOptions);
extern template std::vector<Tensor<float>> grad(const Tensor<float>&,
                                                const std::vector<Tensor<float>>&, GradOptions);
extern template std::vector<Tensor<double>> grad(const Tensor<double>&,
                                                 const std::vector<Tensor<double>>&, GradOptions);

}  // namespace vitdiv::ad
