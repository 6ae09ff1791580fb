#include "deskflow/tape.hpp"

#include "deskflow/errors.hpp"

namespace deskflow::nn {

template <typename T>
Var<T> Tape<T>::record(std::string op, Tensor<T> value, std::vector<Var<T>> inputs,
                       std::function<void(Node<T>&)> backward) {
  if (check_finite_ && !value.all_finite()) throw Error("non-finite forward value in op '" + op + "'");
  auto node = std::make_shared<Node<T>>();
  node->op = std::move(op);
  node->value = std::move(value);
  for (const auto& in : inputs) node->requires_grad = node->requires_grad || (in && in->requires_grad);
  node->inputs = std::move(inputs);
  if (node->requires_grad) node->backward = std::move(backward);
  nodes_.push_back(node);
  return node;
}

template <typename T>
void Tape<T>::backward(const Var<T>& root) {
  if (root->value.size() != 1) throw ShapeError("backward() without a seed needs a single-element root");
  root->ensure_grad().data()[0] += T(1);
  run_backward();
}

template <typename T>
void Tape<T>::backward(const Var<T>& root, const Tensor<T>& seed) {
  if (!(seed.shape() == root->value.shape())) throw ShapeError("backward seed shape mismatch");
  Tensor<T>& g = root->ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] += seed.data()[i];
  run_backward();
}

template <typename T>
void Tape<T>::run_backward() {
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node<T>& node = **it;
    if (!node.has_grad() || !node.backward) continue;
    node.backward(node);
    if (check_finite_) {
      for (const auto& in : node.inputs)
        if (in && in->has_grad() && !in->grad.all_finite())
          throw Error("non-finite gradient flowing out of op '" + node.op + "'");
    }
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace deskflow::nn
