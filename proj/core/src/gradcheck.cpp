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

#include "vitdiv/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "vitdiv/autograd.hpp"

namespace vitdiv::ad {

namespace {

double evaluate(const ScalarFunction& f, const Tensor<double>& x) {
  NoGradGuard no_grad;
  const double value = f(x).item();
  if (!std::isfinite(value)) throw NumericError("check_gradient: f is non-finite at a probe point");
  return value;
}

}  // namespace

double check_gradient(const ScalarFunction& f, Tensor<double> x, double step) {
  if (!x.is_leaf()) throw Error("check_gradient: x must be a leaf tensor");
  const bool had_grad = x.requires_grad();
  x.set_requires_grad(true);

  Tensor<double> analytic;
  {
    GradModeGuard grad_on(true);
    const Tensor<double> y = f(x);
    if (!std::isfinite(y.item())) {
      x.set_requires_grad(had_grad);
      throw NumericError("check_gradient: f(x) is non-finite");
    }
    analytic = grad(y, {x})[0];
  }
  x.set_requires_grad(had_grad);

  auto values = x.mutable_data();
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double original = values[i];
    // Use the representable step actually taken on each side.
    const double up = original + step;
    const double down = original - step;
    values[i] = up;
    const double f_up = evaluate(f, x);
    values[i] = down;
    const double f_down = evaluate(f, x);
    values[i] = original;
    const double numeric = (f_up - f_down) / (up - down);
    const double a = analytic.data()[i];
    const double err = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace vitdiv::ad
