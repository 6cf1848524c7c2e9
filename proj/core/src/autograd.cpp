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

#include "vitdiv/autograd.hpp"

#include <unordered_map>
#include <utility>

#include "vitdiv/ops.hpp"

namespace vitdiv::ad {

namespace {

thread_local std::vector<std::string> t_warnings;

void warn(std::string message) { t_warnings.push_back(std::move(message)); }

// Post-order over every tensor reachable from `roots` through inputs that
// require grad. Iterative so deep graphs cannot overflow the stack.
template <typename T>
std::vector<Tensor<T>> topological_order(const std::vector<Tensor<T>>& roots,
                                         std::unordered_map<const void*, std::size_t>& index) {
  std::vector<Tensor<T>> order;
  std::unordered_map<const void*, bool> seen;
  std::vector<std::pair<Tensor<T>, std::size_t>> stack;
  for (const auto& root : roots) {
    if (!root.requires_grad() || seen.count(root.id())) continue;
    seen[root.id()] = true;
    stack.emplace_back(root, 0);
    while (!stack.empty()) {
      auto& [tensor, next] = stack.back();
      const auto& node = tensor.node();
      if (node && next < node->inputs.size()) {
        const Tensor<T> child = node->inputs[next++];
        if (child.defined() && child.requires_grad() && !seen.count(child.id())) {
          seen[child.id()] = true;
          stack.emplace_back(child, 0);
        }
        continue;
      }
      index[tensor.id()] = order.size();
      order.push_back(tensor);
      stack.pop_back();
    }
  }
  return order;
}

template <typename T>
void accumulate(Tensor<T>& slot, const Tensor<T>& value) {
  slot = slot.defined() ? add(slot, value) : value;
}

}  // namespace

std::vector<std::string> take_warnings() {
  std::vector<std::string> out;
  out.swap(t_warnings);
  return out;
}

template <typename T>
std::vector<Tensor<T>> vjp(const std::vector<Tensor<T>>& outputs,
                           const std::vector<Tensor<T>>& cotangents,
                           const std::vector<Tensor<T>>& wrt, GradOptions options) {
  if (outputs.size() != cotangents.size()) {
    throw Error("vjp: outputs and cotangents differ in count");
  }
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    if (outputs[k].shape() != cotangents[k].shape()) {
      throw ShapeError("vjp", outputs[k].shape(), cotangents[k].shape(),
                       "cotangent must match output shape");
    }
  }

  std::unordered_map<const void*, std::size_t> index;
  const std::vector<Tensor<T>> order = topological_order(outputs, index);
  const std::size_t count = order.size();

  std::vector<bool> is_wrt(count, false);
  for (const auto& w : wrt) {
    if (!w.defined()) throw Error("vjp: undefined wrt tensor");
    auto it = index.find(w.id());
    if (it != index.end()) is_wrt[it->second] = true;
  }

  // A node is needed when some wrt tensor lies at or below it.
  std::vector<bool> needed(count, false);
  for (std::size_t i = 0; i < count; ++i) {
    bool need = is_wrt[i];
    if (const auto& node = order[i].node()) {
      for (const auto& in : node->inputs) {
        if (!in.defined() || !in.requires_grad()) continue;
        if (needed[index.at(in.id())]) need = true;
      }
    }
    needed[i] = need;
  }

  GradModeGuard mode(options.create_graph);
  std::vector<Tensor<T>> grads(count);
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    if (!outputs[k].requires_grad()) continue;
    accumulate(grads[index.at(outputs[k].id())], cotangents[k]);
  }

  for (std::size_t r = count; r-- > 0;) {
    const Tensor<T>& tensor = order[r];
    const auto& node = tensor.node();
    if (!needed[r] || !node || !grads[r].defined()) continue;
    const auto& inputs = node->inputs;
    bool any_input_needed = false;
    for (const auto& in : inputs) {
      if (in.defined() && in.requires_grad() && needed[index.at(in.id())]) any_input_needed = true;
    }
    if (!any_input_needed) continue;
    const std::vector<Tensor<T>> input_grads = node->vjp(inputs, tensor, grads[r]);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const auto& in = inputs[k];
      if (!in.defined() || !in.requires_grad() || !input_grads[k].defined()) continue;
      const std::size_t j = index.at(in.id());
      if (!needed[j]) continue;
      accumulate(grads[j], input_grads[k]);
    }
    if (!is_wrt[r]) grads[r] = Tensor<T>{};
  }

  std::vector<Tensor<T>> result;
  result.reserve(wrt.size());
  for (const auto& w : wrt) {
    if (!w.requires_grad()) {
      warn("grad requested for a tensor that does not require grad; returning zeros");
      result.push_back(Tensor<T>::zeros(w.shape()));
      continue;
    }
    auto it = index.find(w.id());
    if (it == index.end() || !grads[it->second].defined()) {
      if (!options.allow_unused) throw Error("grad: a wrt tensor is not connected to the outputs");
      warn("grad requested for a tensor unreachable from the outputs; returning zeros");
      result.push_back(Tensor<T>::zeros(w.shape()));
      continue;
    }
    const Tensor<T>& g = grads[it->second];
    result.push_back(options.create_graph ? g : g.detach());
  }
  return result;
}

template <typename T>
std::vector<Tensor<T>> grad(const Tensor<T>& output, const std::vector<Tensor<T>>& wrt,
                            GradOptions options) {
  if (output.numel() != 1) {
    throw ShapeError("grad", output.shape(), {}, "output must be a scalar");
  }
  return vjp<T>({output}, {Tensor<T>::full(output.shape(), T(1))}, wrt, options);
}

template std::vector<Tensor<float>> vjp(const std::vector<Tensor<float>>&,
                                        const std::vector<Tensor<float>>&,
                                        const std::vector<Tensor<float>>&, GradOptions);
template std::vector<Tensor<double>> vjp(const std::vector<Tensor<double>>&,
                                         const std::vector<Tensor<double>>&,
                                         const std::vector<Tensor<double>>&, GradOptions);
template std::vector<Tensor<float>> grad(const Tensor<float>&, const std::vector<Tensor<float>>&,
                                         GradOptions);
template std::vector<Tensor<double>> grad(const Tensor<double>&,
                                          const std::vector<Tensor<double>>&, GradOptions);

}  // namespace vitdiv::ad
