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

#include "vitdiv/optim.hpp"

#include <cmath>

namespace vitdiv {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate", "must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "must lie in (0, 1)");
  if (!(eps > 0.0)) throw ConfigError("adam_eps", "must be positive");
}

template <typename T>
Adam<T>::Adam(std::vector<ad::Tensor<T>> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  config_.validate();
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
    v_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
  }
}

template <typename T>
bool Adam<T>::step(const std::vector<ad::Tensor<T>>& grads) {
  if (grads.size() != params_.size()) throw Error("Adam::step: gradient count mismatch");
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (grads[k].shape() != params_[k].shape()) {
      throw ShapeError("Adam::step", params_[k].shape(), grads[k].shape());
    }
    for (T g : grads[k].data()) {
      if (!std::isfinite(g)) {
        ++skipped_;
        return false;
      }
    }
  }
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto p = params_[k].mutable_data();
    const auto g = grads[k].data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] = static_cast<T>(p[i] - config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.eps));
    }
  }
  return true;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace vitdiv
