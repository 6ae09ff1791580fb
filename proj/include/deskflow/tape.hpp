#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "deskflow/tensor.hpp"

namespace deskflow::nn {

template <typename T>
struct Node;

template <typename T>
using Var = std::shared_ptr<Node<T>>;

/// One value in the computation graph. Gradients are allocated on first use.
template <typename T>
struct Node {
  std::string op;
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<Var<T>> inputs;
  /// Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;

  Tensor<T>& ensure_grad() {
    if (grad.empty() && !value.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
  bool has_grad() const { return !grad.empty(); }
};

/// Leaf node (parameter or input). Leaves are not recorded on a tape and keep
/// their gradient across tape resets until zeroed.
template <typename T>
Var<T> make_leaf(Tensor<T> value, bool requires_grad, std::string name = "leaf") {
  auto node = std::make_shared<Node<T>>();
  node->op = std::move(name);
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return node;
}

/// Records operations in creation order, which is a topological order, so
/// the backward pass walks the list once in reverse.
template <typename T>
class Tape {
 public:
  Var<T> record(std::string op, Tensor<T> value, std::vector<Var<T>> inputs,
                std::function<void(Node<T>&)> backward);

  /// Seeds d(root)/d(root) = 1 for a single-element root and propagates.
  void backward(const Var<T>& root);
  /// Propagates from an explicit seed gradient of the same shape as root.
  void backward(const Var<T>& root, const Tensor<T>& seed);

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }
  /// When set, every forward value and propagated gradient is scanned for NaN/Inf.
  void set_check_finite(bool on) { check_finite_ = on; }

 private:
  void run_backward();

  std::vector<Var<T>> nodes_;
  bool check_finite_ = false;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace deskflow::nn
