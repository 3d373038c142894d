// Copyright 2026 The rvos Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rvos/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace rvos::ad {

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<int> s, float fill)
    : shape(std::move(s)), data(static_cast<size_t>(shape_numel(shape)), fill) {}

float Tensor::value() const {
  if (data.size() != 1)
    throw std::logic_error("value() on non-scalar tensor of shape " + shape_str(shape));
  return data[0];
}

void Tensor::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
}

TensorRef make_tensor(std::vector<int> shape, float fill) {
  return std::make_shared<Tensor>(std::move(shape), fill);
}

TensorRef make_tensor(std::vector<int> shape, std::vector<float> values) {
  if (static_cast<int64_t>(values.size()) != shape_numel(shape))
    throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                " does not fill shape " + shape_str(shape));
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->data = std::move(values);
  return t;
}

TensorRef make_param(std::vector<int> shape, std::vector<float> values) {
  auto t = make_tensor(std::move(shape), std::move(values));
  t->requires_grad = true;
  return t;
}

TensorRef detach(const TensorRef& t) {
  auto out = std::make_shared<Tensor>();
  out->shape = t->shape;
  out->data = t->data;
  return out;
}

void backward(const TensorRef& root) {
  if (!root) throw std::invalid_argument("backward on null tensor");
  if (root->numel() != 1) throw std::invalid_argument("backward root must be scalar");

  // Iterative post-order DFS; graphs unrolled over frame windows get deep.
  std::vector<Tensor*> order;
  std::unordered_set<Tensor*> seen;
  std::vector<std::pair<Tensor*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Tensor* p = node->parents[next].get();
      ++next;
      if (p && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor* node = *it;
    if (node->backward_op && !node->grad.empty()) node->backward_op(*node);
  }
}

std::vector<float> kaiming_uniform(int64_t count, int64_t fan_in, Rng& rng) {
  const float bound = std::sqrt(6.0f / static_cast<float>(std::max<int64_t>(1, fan_in)));
  std::vector<float> v(static_cast<size_t>(count));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return v;
}

}  // namespace rvos::ad
