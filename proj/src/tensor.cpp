#include "iidlab/tensor.hpp"

#include <unordered_set>

namespace iid::ad {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string Shape::str() const {
  return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
         std::to_string(w);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(shape, T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  return from(shape, std::vector<T>(shape.numel(), value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  if (values.size() != shape.numel()) {
    throw Error(ErrorCode::ShapeMismatch, "tensor data size does not match shape " + shape.str());
  }
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from(Shape{1, 1, 1, 1}, {value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "item() on tensor of shape " + shape().str());
  }
  return node_->value[0];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return from(shape(), node_->value, false);
}

template <typename T>
void Tensor<T>::backward() const {
  if (numel() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "backward() needs a scalar, got " + shape().str());
  }
  if (!node_->requires_grad) return;
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent && parent->requires_grad && visited.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  node_->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> values,
                      std::initializer_list<const Tensor<T>*> parents,
                      std::function<void(typename Tensor<T>::Node&)> backward) {
  auto node = std::make_shared<typename Tensor<T>::Node>();
  node->shape = shape;
  node->value = std::move(values);
  if (grad_enabled()) {
    bool any = false;
    for (const Tensor<T>* p : parents) any = any || (p->defined() && p->requires_grad());
    if (any) {
      node->requires_grad = true;
      for (const Tensor<T>* p : parents) node->parents.push_back(p->defined() ? p->node() : nullptr);
      node->backward = std::move(backward);
    }
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> values, const std::vector<Tensor<T>>& parents,
                      std::function<void(typename Tensor<T>::Node&)> backward) {
  auto node = std::make_shared<typename Tensor<T>::Node>();
  node->shape = shape;
  node->value = std::move(values);
  if (grad_enabled()) {
    bool any = false;
    for (const Tensor<T>& p : parents) any = any || p.requires_grad();
    if (any) {
      node->requires_grad = true;
      for (const Tensor<T>& p : parents) node->parents.push_back(p.node());
      node->backward = std::move(backward);
    }
  }
  return Tensor<T>(std::move(node));
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> make_result(Shape, std::vector<float>, std::initializer_list<const Tensor<float>*>,
                                   std::function<void(Tensor<float>::Node&)>);
template Tensor<double> make_result(Shape, std::vector<double>,
                                    std::initializer_list<const Tensor<double>*>,
                                    std::function<void(Tensor<double>::Node&)>);
template Tensor<float> make_result(Shape, std::vector<float>, const std::vector<Tensor<float>>&,
                                   std::function<void(Tensor<float>::Node&)>);
template Tensor<double> make_result(Shape, std::vector<double>, const std::vector<Tensor<double>>&,
                                    std::function<void(Tensor<double>::Node&)>);

}  // namespace iid::ad
