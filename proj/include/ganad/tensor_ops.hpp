#pragma once

// Plain tensor kernels without graph bookkeeping.

#include "ganad/tensor.hpp"

namespace ganad::kernels {

template <typename T> Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w);
template <typename T> Tensor<T> conv2d_input_grad(const Tensor<T>& g, const Tensor<T>& w);
template <typename T> Tensor<T> conv2d_weight_grad(const Tensor<T>& x, const Tensor<T>& g, int kernel);
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a, bool trans_b);
template <typename T> Tensor<T> upsample2(const Tensor<T>& a);
template <typename T> Tensor<T> avgpool2(const Tensor<T>& a);

}  // namespace ganad::kernels
