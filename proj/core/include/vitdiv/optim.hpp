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
#include <vector>

#include "vitdiv/tensor.hpp"

namespace vitdiv {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

/// Adaptive-moment optimizer with bias correction, updating leaf tensors in place.
template <typename T>
class Adam {
 public:
  Adam(std::vector<ad::Tensor<T>> params, AdamConfig config);

  /// m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;
  /// p <- p - lr * m_hat / (sqrt(v_hat) + eps).
  /// If any gradient is non-finite nothing changes and false is returned.
  bool step(const std::vector<ad::Tensor<T>>& grads);

  std::int64_t steps() const { return steps_; }
  std::int64_t skipped() const { return skipped_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<ad::Tensor<T>> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamConfig config_;
  std::int64_t steps_ = 0;
  std::int64_t skipped_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace vitdiv
