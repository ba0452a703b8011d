#pragma once

// Serial, loop-by-loop versions of the convolution kernels. They are the
// oracle for the OpenMP kernels in tests and the baseline in the benchmark.

#include <span>

#include "semimage/nnet/kernels.hpp"

namespace semimage::nnet::reference {

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, std::span<const T> w, std::span<const T> b, const ConvGeometry& g);

template <typename T>
void conv2d_backward(const Tensor4<T>& x, std::span<const T> w, const Tensor4<T>& dy, const ConvGeometry& g,
                     Tensor4<T>* dx, std::span<T> dw, std::span<T> db);

template <typename T>
Matrix<T> dense_forward(const Matrix<T>& x, std::span<const T> w, std::span<const T> b, std::size_t out);

}  // namespace semimage::nnet::reference
