#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mhaff/error.hpp"

namespace mhaff::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Plain host array, used for parameters, gradients and inputs.
template <typename T>
struct Array {
  Shape shape;
  std::vector<T> data;

  Array() = default;
  Array(Shape s, T fill = T(0)) : shape(std::move(s)), data(numel(shape), fill) {}
  Array(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != numel(shape)) throw Error(ErrorCode::kShapeMismatch, "array values do not match shape");
  }

  std::size_t size() const { return data.size(); }
  friend bool operator==(const Array&, const Array&) = default;
};

template <typename T>
class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(Graph<T>* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph<T>& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Shape& shape() const;
  std::span<const T> value() const;
  // Empty until backward() has run through this node.
  std::span<const T> grad() const;
  T item() const;

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Tape of operations. Nodes are appended in creation order, which is a
// topological order, so backward walks the tape in reverse. A graph is
// confined to one thread; separate graphs are independent.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Tensor<T> constant(Shape shape, std::vector<T> values);
  Tensor<T> constant(const Array<T>& a) { return constant(a.shape, a.data); }
  Tensor<T> parameter(Shape shape, std::vector<T> values);
  Tensor<T> parameter(const Array<T>& a) { return parameter(a.shape, a.data); }

  // Appends an operation result. requires_grad is inherited from `inputs`.
  Tensor<T> record(Shape shape, std::vector<T> value, std::initializer_list<Tensor<T>> inputs, BackwardFn fn);
  Tensor<T> record(Shape shape, std::vector<T> value, const std::vector<Tensor<T>>& inputs, BackwardFn fn);

  // Reverse-mode accumulation from a single-element node. Gradients of all
  // earlier nodes are reset first. Throws NonScalarLoss otherwise.
  void backward(const Tensor<T>& root);

  std::size_t size() const { return nodes_.size(); }
  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  // Gradient buffer of a node during backward; empty when the node needs none.
  std::vector<T>& grad(std::size_t id) { return nodes_[id].grad; }

 private:
  std::vector<Node> nodes_;
};

template <typename T>
const Shape& Tensor<T>::shape() const {
  return graph_->node(id_).shape;
}
template <typename T>
std::span<const T> Tensor<T>::value() const {
  return graph_->node(id_).value;
}
template <typename T>
std::span<const T> Tensor<T>::grad() const {
  return graph_->node(id_).grad;
}
template <typename T>
T Tensor<T>::item() const {
  const auto v = value();
  if (v.size() != 1) throw Error(ErrorCode::kShapeMismatch, "item() on non-scalar " + shape_string(shape()));
  return v[0];
}

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace mhaff::nn
