#pragma once

#include <vector>

#include "mhaff/nn/tensor.hpp"

// Differentiable operators. Each is instantiated for float (training) and
// double (gradient verification).
namespace mhaff::nn {

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
// Element `index` of the flattened tensor, as a scalar.
template <typename T> Tensor<T> pick(const Tensor<T>& a, std::size_t index);
// Row `index` of a rank-2 tensor.
template <typename T> Tensor<T> row(const Tensor<T>& a, std::size_t index);
// Stacks rank-1 tensors (d) as rows, or appends the rows of rank-2 tensors.
template <typename T> Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts);

// (m, k) x (k, n) -> (m, n)
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// x (B, d_in) or (d_in), W (d_in, d_out), b (d_out)
template <typename T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);
// w (t) as convex weights over the rows of x (t, d) -> (d)
template <typename T> Tensor<T> weighted_rows(const Tensor<T>& w, const Tensor<T>& x);

template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> tanh_act(const Tensor<T>& a);

// 3x3 cross-correlation, stride 1, zero padding 1.
// x (C_in, H, W) or (N, C_in, H, W); kernels (C_out, C_in, 3, 3); bias (C_out).
template <typename T> Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernels);
template <typename T> Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias);
// 2x2 max pooling over the last two dims; ties route to the first element in row-major order.
template <typename T> Tensor<T> maxpool2(const Tensor<T>& x);
// Mean over the last two dims: (C, H, W) -> (C), (N, C, H, W) -> (N, C).
template <typename T> Tensor<T> global_avg_pool(const Tensor<T>& x);

inline constexpr double kLayerNormEps = 1e-5;
// Normalizes over the last dim of (d) or (B, d); population variance.
template <typename T> Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias);

// Max-subtracted softmax over a rank-1 tensor.
template <typename T> Tensor<T> softmax(const Tensor<T>& x);
// -log softmax(logits)[target]
template <typename T> Tensor<T> cross_entropy(const Tensor<T>& logits, std::size_t target);

}  // namespace mhaff::nn
