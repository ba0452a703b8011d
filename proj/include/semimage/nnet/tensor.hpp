#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace semimage::nnet {

/// Dense NCHW tensor.
template <typename T>
struct Tensor4 {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<T> data;

    Tensor4() = default;
    Tensor4(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_)
        : n(n_), c(c_), h(h_), w(w_), data(n_ * c_ * h_ * w_, T(0)) {}

    std::size_t size() const { return data.size(); }
    std::size_t plane() const { return h * w; }
    std::size_t index(std::size_t in, std::size_t ic, std::size_t ih, std::size_t iw) const {
        return ((in * c + ic) * h + ih) * w + iw;
    }
    T& operator()(std::size_t in, std::size_t ic, std::size_t ih, std::size_t iw) { return data[index(in, ic, ih, iw)]; }
    T operator()(std::size_t in, std::size_t ic, std::size_t ih, std::size_t iw) const {
        return data[index(in, ic, ih, iw)];
    }
    bool same_shape(const Tensor4& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

/// Row-major batch x features matrix.
template <typename T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T(0)) {}

    T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    T operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const T> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

}  // namespace semimage::nnet
