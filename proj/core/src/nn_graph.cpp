#include <numeric>
#include <sstream>

#include "mhaff/nn/tensor.hpp"

namespace mhaff::nn {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

template <typename T>
Tensor<T> Graph<T>::constant(Shape shape, std::vector<T> values) {
  if (values.size() != numel(shape)) throw Error(ErrorCode::kShapeMismatch, "constant values do not match shape");
  nodes_.push_back(Node{std::move(shape), std::move(values), {}, false, {}});
  return Tensor<T>(this, nodes_.size() - 1);
}

template <typename T>
Tensor<T> Graph<T>::parameter(Shape shape, std::vector<T> values) {
  if (values.size() != numel(shape)) throw Error(ErrorCode::kShapeMismatch, "parameter values do not match shape");
  nodes_.push_back(Node{std::move(shape), std::move(values), {}, true, {}});
  return Tensor<T>(this, nodes_.size() - 1);
}

template <typename T>
Tensor<T> Graph<T>::record(Shape shape, std::vector<T> value, std::initializer_list<Tensor<T>> inputs, BackwardFn fn) {
  bool needs_grad = false;
  for (const auto& t : inputs) needs_grad = needs_grad || nodes_[t.id()].requires_grad;
  nodes_.push_back(Node{std::move(shape), std::move(value), {}, needs_grad, needs_grad ? std::move(fn) : BackwardFn{}});
  return Tensor<T>(this, nodes_.size() - 1);
}

template <typename T>
Tensor<T> Graph<T>::record(Shape shape, std::vector<T> value, const std::vector<Tensor<T>>& inputs, BackwardFn fn) {
  bool needs_grad = false;
  for (const auto& t : inputs) needs_grad = needs_grad || nodes_[t.id()].requires_grad;
  nodes_.push_back(Node{std::move(shape), std::move(value), {}, needs_grad, needs_grad ? std::move(fn) : BackwardFn{}});
  return Tensor<T>(this, nodes_.size() - 1);
}

template <typename T>
void Graph<T>::backward(const Tensor<T>& root) {
  if (root.value().size() != 1) {
    throw Error(ErrorCode::kNonScalarLoss, "backward needs a single-element node, got " + shape_string(root.shape()));
  }
  for (auto& n : nodes_) {
    n.grad.clear();
    if (n.requires_grad) n.grad.assign(n.value.size(), T(0));
  }
  if (!nodes_[root.id()].requires_grad) return;
  nodes_[root.id()].grad[0] = T(1);
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (n.requires_grad && n.backward) n.backward(*this, id);
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace mhaff::nn
