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

#include <functional>

#include "vitdiv/tensor.hpp"

namespace vitdiv::ad {

using ScalarFunction = std::function<Tensor<double>(const Tensor<double>&)>;

/// Compares the reverse-mode gradient of `f` at `x` with central differences.
///
/// Returns max_i |analytic_i - numeric_i| / (|analytic_i| + |numeric_i| + 1e-12).
/// `x` is perturbed in place (and restored), so `f` may capture it and use it
/// through other objects, e.g. as a model parameter. `x` must be a leaf; its
/// requires_grad flag is turned on for the analytic pass and restored after.
/// Throws NumericError when f is non-finite at x or at a probe point.
double check_gradient(const ScalarFunction& f, Tensor<double> x, double step = 1e-5);

}  // namespace vitdiv::ad
