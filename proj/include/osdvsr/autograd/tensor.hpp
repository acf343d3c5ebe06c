// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "osdvsr/core/types.hpp"

namespace osdvsr::ag {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);

/// Graph node. `backward` reads this node's grad and accumulates into the
/// parents' grads; it is only set when some parent requires a gradient.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer();
};

/// Reference-counted handle to a value in the autodiff graph. Copies share
/// the node; parameters are leaves that persist across steps.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor filled(Shape shape, double value);
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor scalar(double value) { return constant({1}, {value}); }
  static Tensor from_grid(const Grid& grid);

  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] const Shape& shape() const { return node_->shape; }
  [[nodiscard]] int dim(std::size_t i) const { return node_->shape.at(i); }
  [[nodiscard]] std::size_t numel() const { return node_->value.size(); }
  [[nodiscard]] std::span<const double> values() const { return node_->value; }
  /// Direct write access; only meaningful for leaves (optimizer updates).
  [[nodiscard]] std::span<double> mutable_values() { return node_->value; }
  [[nodiscard]] std::span<const double> grad() const;
  [[nodiscard]] double item() const;

  [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }
  void zero_grad();

  /// Same values, cut from the graph.
  [[nodiscard]] Tensor detach() const;

  /// Reverse-mode sweep from a scalar (numel == 1) root; seeds d(root) = 1.
  void backward() const;

  [[nodiscard]] Grid to_grid() const;
  [[nodiscard]] Node* node() const { return node_.get(); }
  [[nodiscard]] const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Builds an op result. The backward closure is dropped (and parents are not
/// retained) when no parent requires a gradient.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward);

}  // namespace osdvsr::ag
