#pragma once

// Layer kernels. Work is split across the batch dimension with OpenMP;
// parameter gradients are summed per sample and then reduced in sample order,
// so results do not depend on the thread count.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "semimage/nnet/tensor.hpp"

namespace semimage::nnet {

struct ConvGeometry {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 1;

    std::size_t out_size(std::size_t in) const { return (in + 2 * padding - kernel) / stride + 1; }
    std::size_t weight_count() const { return out_channels * in_channels * kernel * kernel; }
    /// Throws DataError unless x fits this geometry.
    void check_input(std::size_t channels, std::size_t h, std::size_t w) const;
    bool operator==(const ConvGeometry&) const = default;
};

/// Cross-correlation with zero padding. w is [out][in][k][k], b is [out].
template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, std::span<const T> w, std::span<const T> b, const ConvGeometry& g);

/// dx is overwritten when non-null; dw and db are accumulated into.
template <typename T>
void conv2d_backward(const Tensor4<T>& x, std::span<const T> w, const Tensor4<T>& dy, const ConvGeometry& g,
                     Tensor4<T>* dx, std::span<T> dw, std::span<T> db);

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x);

/// Gradient passes where x > 0.
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& x, const Tensor4<T>& dy);

/// 2x2 window, stride 2, ceil mode (a trailing odd row/column forms a
/// clipped window). argmax holds the flat input index per output element;
/// ties go to the first maximum in row-major window order.
template <typename T>
struct PoolResult {
    Tensor4<T> y;
    std::vector<std::uint32_t> argmax;
};

template <typename T>
PoolResult<T> maxpool2_forward(const Tensor4<T>& x);

template <typename T>
Tensor4<T> maxpool2_backward(const Tensor4<T>& dy, const std::vector<std::uint32_t>& argmax, const Tensor4<T>& x_shape);

template <typename T>
Matrix<T> global_avg_pool_forward(const Tensor4<T>& x);

template <typename T>
Tensor4<T> global_avg_pool_backward(const Matrix<T>& dy, const Tensor4<T>& x_shape);

/// y = x W^T + b with W as [out][in].
template <typename T>
Matrix<T> dense_forward(const Matrix<T>& x, std::span<const T> w, std::span<const T> b, std::size_t out);

template <typename T>
void dense_backward(const Matrix<T>& x, std::span<const T> w, const Matrix<T>& dy, Matrix<T>* dx, std::span<T> dw,
                    std::span<T> db);

template <typename T>
Matrix<T> relu_forward(const Matrix<T>& x);

template <typename T>
Matrix<T> relu_backward(const Matrix<T>& x, const Matrix<T>& dy);

template <typename T>
struct XentResult {
    T loss{};
    std::vector<T> grad;  // softmax - one_hot
};

/// Max-shifted softmax cross-entropy for a single example.
template <typename T>
XentResult<T> softmax_xent(std::span<const T> logits, std::size_t target);

template <typename T>
std::vector<T> softmax(std::span<const T> logits);

std::size_t argmax(std::span<const float> v);
std::size_t argmax(std::span<const double> v);

}  // namespace semimage::nnet
