// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/autograd/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

namespace osdvsr::ag {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    require(d >= 0, "tensor: negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::vector<double>& Node::grad_buffer() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  require(ag::numel(shape) == values.size(), "Tensor::constant: size does not match shape");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::filled(Shape shape, double value) {
  const std::size_t n = ag::numel(shape);
  return constant(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::from_grid(const Grid& grid) {
  return constant({grid.channels(), grid.height(), grid.width()}, grid.vec());
}

std::span<const double> Tensor::grad() const {
  return node_->grad_buffer();
}

double Tensor::item() const {
  require(node_->value.size() == 1, "Tensor::item: tensor is not a scalar");
  return node_->value[0];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  return constant(node_->shape, node_->value);
}

void Tensor::backward() const {
  require(node_->value.size() == 1, "Tensor::backward: root must be a scalar");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p != nullptr && p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

Grid Tensor::to_grid() const {
  const Shape& s = node_->shape;
  if (s.size() == 3) return Grid(s[0], s[1], s[2], node_->value);
  if (s.size() == 2) return Grid(1, s[0], s[1], node_->value);
  detail::contract_fail("Tensor::to_grid: expects a 2D or 3D tensor");
}

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [](const Tensor& p) { return p.defined() && p.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    // Positions are preserved (undefined parents become null) so backward
    // closures can address parents by index.
    for (auto& p : parents) node->parents.push_back(p.defined() ? p.node_ptr() : nullptr);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

}  // namespace osdvsr::ag
