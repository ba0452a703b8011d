#include "semimage/nnet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "semimage/error.hpp"

namespace semimage::nnet {
namespace {

using Index = std::ptrdiff_t;

// Output positions o in [lo, hi) for which o*stride + tap - padding lies in [0, in).
std::pair<std::size_t, std::size_t> valid_range(std::size_t out, std::size_t in, std::size_t stride,
                                                std::size_t tap, std::size_t padding) {
    std::size_t lo = 0;
    if (tap < padding) lo = (padding - tap + stride - 1) / stride;
    // largest o with o*stride + tap - padding <= in - 1
    const auto limit = static_cast<long long>(in) - 1 + static_cast<long long>(padding) - static_cast<long long>(tap);
    std::size_t hi = limit < 0 ? 0 : static_cast<std::size_t>(limit) / stride + 1;
    hi = std::min(hi, out);
    return {std::min(lo, hi), hi};
}

}  // namespace

void ConvGeometry::check_input(std::size_t channels, std::size_t h, std::size_t w) const {
    if (channels != in_channels)
        throw DataError("conv2d: input has " + std::to_string(channels) + " channels, expected " +
                        std::to_string(in_channels));
    if (kernel == 0 || stride == 0) throw DataError("conv2d: kernel and stride must be positive");
    if (h + 2 * padding < kernel || w + 2 * padding < kernel)
        throw DataError("conv2d: spatial size smaller than the kernel");
}

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, std::span<const T> w, std::span<const T> b, const ConvGeometry& g) {
    g.check_input(x.c, x.h, x.w);
    if (w.size() != g.weight_count() || b.size() != g.out_channels) throw DataError("conv2d: parameter shape mismatch");
    const auto oh_n = g.out_size(x.h);
    const auto ow_n = g.out_size(x.w);
    const auto k = g.kernel;
    Tensor4<T> y(x.n, g.out_channels, oh_n, ow_n);

#pragma omp parallel for schedule(static)
    for (Index n = 0; n < static_cast<Index>(x.n); ++n) {
        for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
            T* out = &y.data[y.index(n, oc, 0, 0)];
            std::fill(out, out + oh_n * ow_n, b[oc]);
            for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
                const T* in = &x.data[x.index(n, ic, 0, 0)];
                for (std::size_t kh = 0; kh < k; ++kh) {
                    const auto [oh_lo, oh_hi] = valid_range(oh_n, x.h, g.stride, kh, g.padding);
                    for (std::size_t kw = 0; kw < k; ++kw) {
                        const T wv = w[((oc * g.in_channels + ic) * k + kh) * k + kw];
                        const auto [ow_lo, ow_hi] = valid_range(ow_n, x.w, g.stride, kw, g.padding);
                        for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                            const T* in_row = in + (oh * g.stride + kh - g.padding) * x.w;
                            T* out_row = out + oh * ow_n;
                            for (std::size_t ow = ow_lo; ow < ow_hi; ++ow)
                                out_row[ow] += wv * in_row[ow * g.stride + kw - g.padding];
                        }
                    }
                }
            }
        }
    }
    return y;
}

template <typename T>
void conv2d_backward(const Tensor4<T>& x, std::span<const T> w, const Tensor4<T>& dy, const ConvGeometry& g,
                     Tensor4<T>* dx, std::span<T> dw, std::span<T> db) {
    g.check_input(x.c, x.h, x.w);
    const auto oh_n = g.out_size(x.h);
    const auto ow_n = g.out_size(x.w);
    if (dy.n != x.n || dy.c != g.out_channels || dy.h != oh_n || dy.w != ow_n)
        throw DataError("conv2d backward: gradient shape mismatch");
    if (w.size() != g.weight_count() || dw.size() != w.size() || db.size() != g.out_channels)
        throw DataError("conv2d backward: parameter shape mismatch");
    if (dx) *dx = Tensor4<T>(x.n, x.c, x.h, x.w);
    const auto k = g.kernel;
    const auto wc = g.weight_count();
    std::vector<T> dw_part(x.n * wc, T(0));
    std::vector<T> db_part(x.n * g.out_channels, T(0));

#pragma omp parallel for schedule(static)
    for (Index n = 0; n < static_cast<Index>(x.n); ++n) {
        T* gw = dw_part.data() + n * wc;
        T* gb = db_part.data() + n * g.out_channels;
        for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
            const T* gout = &dy.data[dy.index(n, oc, 0, 0)];
            T sum = 0;
            for (std::size_t i = 0; i < oh_n * ow_n; ++i) sum += gout[i];
            gb[oc] += sum;
            for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
                const T* in = &x.data[x.index(n, ic, 0, 0)];
                T* gin = dx ? &dx->data[dx->index(n, ic, 0, 0)] : nullptr;
                for (std::size_t kh = 0; kh < k; ++kh) {
                    const auto [oh_lo, oh_hi] = valid_range(oh_n, x.h, g.stride, kh, g.padding);
                    for (std::size_t kw = 0; kw < k; ++kw) {
                        const auto widx = ((oc * g.in_channels + ic) * k + kh) * k + kw;
                        const T wv = w[widx];
                        const auto [ow_lo, ow_hi] = valid_range(ow_n, x.w, g.stride, kw, g.padding);
                        T acc = 0;
                        for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                            const auto row = (oh * g.stride + kh - g.padding) * x.w;
                            const T* go = gout + oh * ow_n;
                            for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) {
                                const auto col = ow * g.stride + kw - g.padding;
                                acc += go[ow] * in[row + col];
                                if (gin) gin[row + col] += wv * go[ow];
                            }
                        }
                        gw[widx] += acc;
                    }
                }
            }
        }
    }
    for (std::size_t n = 0; n < x.n; ++n) {
        for (std::size_t i = 0; i < wc; ++i) dw[i] += dw_part[n * wc + i];
        for (std::size_t i = 0; i < g.out_channels; ++i) db[i] += db_part[n * g.out_channels + i];
    }
}

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x) {
    Tensor4<T> y = x;
    for (auto& v : y.data) v = v > T(0) ? v : T(0);
    return y;
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& x, const Tensor4<T>& dy) {
    if (!x.same_shape(dy)) throw DataError("relu backward: shape mismatch");
    Tensor4<T> dx(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.size(); ++i) dx.data[i] = x.data[i] > T(0) ? dy.data[i] : T(0);
    return dx;
}

template <typename T>
PoolResult<T> maxpool2_forward(const Tensor4<T>& x) {
    const auto oh_n = (x.h + 1) / 2;
    const auto ow_n = (x.w + 1) / 2;
    PoolResult<T> r{Tensor4<T>(x.n, x.c, oh_n, ow_n), {}};
    r.argmax.resize(r.y.size());
#pragma omp parallel for schedule(static)
    for (Index n = 0; n < static_cast<Index>(x.n); ++n) {
        for (std::size_t c = 0; c < x.c; ++c) {
            for (std::size_t oh = 0; oh < oh_n; ++oh) {
                for (std::size_t ow = 0; ow < ow_n; ++ow) {
                    std::size_t best = x.index(n, c, 2 * oh, 2 * ow);
                    for (std::size_t dh = 0; dh < 2; ++dh) {
                        for (std::size_t dw = 0; dw < 2; ++dw) {
                            const auto ih = 2 * oh + dh;
                            const auto iw = 2 * ow + dw;
                            if (ih >= x.h || iw >= x.w) continue;
                            const auto idx = x.index(n, c, ih, iw);
                            if (x.data[idx] > x.data[best]) best = idx;
                        }
                    }
                    const auto o = r.y.index(n, c, oh, ow);
                    r.y.data[o] = x.data[best];
                    r.argmax[o] = static_cast<std::uint32_t>(best);
                }
            }
        }
    }
    return r;
}

template <typename T>
Tensor4<T> maxpool2_backward(const Tensor4<T>& dy, const std::vector<std::uint32_t>& argmax, const Tensor4<T>& x_shape) {
    if (argmax.size() != dy.size()) throw DataError("maxpool backward: shape mismatch");
    Tensor4<T> dx(x_shape.n, x_shape.c, x_shape.h, x_shape.w);
    // Windows do not overlap, so every input receives at most one contribution.
    for (std::size_t i = 0; i < dy.size(); ++i) dx.data[argmax[i]] += dy.data[i];
    return dx;
}

template <typename T>
Matrix<T> global_avg_pool_forward(const Tensor4<T>& x) {
    Matrix<T> y(x.n, x.c);
    const auto plane = x.plane();
    for (std::size_t n = 0; n < x.n; ++n) {
        for (std::size_t c = 0; c < x.c; ++c) {
            const T* p = &x.data[x.index(n, c, 0, 0)];
            T sum = 0;
            for (std::size_t i = 0; i < plane; ++i) sum += p[i];
            y(n, c) = sum / static_cast<T>(plane);
        }
    }
    return y;
}

template <typename T>
Tensor4<T> global_avg_pool_backward(const Matrix<T>& dy, const Tensor4<T>& x_shape) {
    if (dy.rows != x_shape.n || dy.cols != x_shape.c) throw DataError("global average pool backward: shape mismatch");
    Tensor4<T> dx(x_shape.n, x_shape.c, x_shape.h, x_shape.w);
    const auto plane = dx.plane();
    for (std::size_t n = 0; n < dx.n; ++n) {
        for (std::size_t c = 0; c < dx.c; ++c) {
            const T g = dy(n, c) / static_cast<T>(plane);
            std::fill_n(&dx.data[dx.index(n, c, 0, 0)], plane, g);
        }
    }
    return dx;
}

template <typename T>
Matrix<T> dense_forward(const Matrix<T>& x, std::span<const T> w, std::span<const T> b, std::size_t out) {
    if (w.size() != out * x.cols || b.size() != out) throw DataError("dense: parameter shape mismatch");
    Matrix<T> y(x.rows, out);
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < static_cast<Index>(x.rows); ++r) {
        for (std::size_t o = 0; o < out; ++o) {
            T acc = b[o];
            const T* wr = w.data() + o * x.cols;
            for (std::size_t i = 0; i < x.cols; ++i) acc += wr[i] * x(r, i);
            y(r, o) = acc;
        }
    }
    return y;
}

template <typename T>
void dense_backward(const Matrix<T>& x, std::span<const T> w, const Matrix<T>& dy, Matrix<T>* dx, std::span<T> dw,
                    std::span<T> db) {
    const auto out = dy.cols;
    if (dy.rows != x.rows || w.size() != out * x.cols || dw.size() != w.size() || db.size() != out)
        throw DataError("dense backward: shape mismatch");
    if (dx) *dx = Matrix<T>(x.rows, x.cols);
    // Rows are reduced serially in order; the layers here are small.
    for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t o = 0; o < out; ++o) {
            const T g = dy(r, o);
            db[o] += g;
            T* gw = dw.data() + o * x.cols;
            const T* wr = w.data() + o * x.cols;
            for (std::size_t i = 0; i < x.cols; ++i) {
                gw[i] += g * x(r, i);
                if (dx) (*dx)(r, i) += g * wr[i];
            }
        }
    }
}

template <typename T>
Matrix<T> relu_forward(const Matrix<T>& x) {
    Matrix<T> y = x;
    for (auto& v : y.data) v = v > T(0) ? v : T(0);
    return y;
}

template <typename T>
Matrix<T> relu_backward(const Matrix<T>& x, const Matrix<T>& dy) {
    if (x.rows != dy.rows || x.cols != dy.cols) throw DataError("relu backward: shape mismatch");
    Matrix<T> dx(x.rows, x.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i) dx.data[i] = x.data[i] > T(0) ? dy.data[i] : T(0);
    return dx;
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
    std::vector<T> p(logits.begin(), logits.end());
    if (p.empty()) return p;
    const T mx = *std::max_element(p.begin(), p.end());
    T sum = 0;
    for (auto& v : p) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : p) v /= sum;
    return p;
}

template <typename T>
XentResult<T> softmax_xent(std::span<const T> logits, std::size_t target) {
    if (target >= logits.size())
        throw DataError("softmax_xent: target " + std::to_string(target) + " outside [0, " +
                        std::to_string(logits.size()) + ")");
    const T mx = *std::max_element(logits.begin(), logits.end());
    T sum = 0;
    for (const T v : logits) sum += std::exp(v - mx);
    XentResult<T> r;
    r.loss = std::log(sum) - (logits[target] - mx);
    r.grad.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) r.grad[i] = std::exp(logits[i] - mx) / sum;
    r.grad[target] -= T(1);
    return r;
}

std::size_t argmax(std::span<const float> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}
std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

#define SEMIMAGE_INSTANTIATE_KERNELS(T)                                                                          \
    template Tensor4<T> conv2d_forward(const Tensor4<T>&, std::span<const T>, std::span<const T>,              \
                                       const ConvGeometry&);                                                    \
    template void conv2d_backward(const Tensor4<T>&, std::span<const T>, const Tensor4<T>&, const ConvGeometry&, \
                                  Tensor4<T>*, std::span<T>, std::span<T>);                                     \
    template Tensor4<T> relu_forward(const Tensor4<T>&);                                                         \
    template Tensor4<T> relu_backward(const Tensor4<T>&, const Tensor4<T>&);                                     \
    template PoolResult<T> maxpool2_forward(const Tensor4<T>&);                                                  \
    template Tensor4<T> maxpool2_backward(const Tensor4<T>&, const std::vector<std::uint32_t>&, const Tensor4<T>&); \
    template Matrix<T> global_avg_pool_forward(const Tensor4<T>&);                                               \
    template Tensor4<T> global_avg_pool_backward(const Matrix<T>&, const Tensor4<T>&);                           \
    template Matrix<T> dense_forward(const Matrix<T>&, std::span<const T>, std::span<const T>, std::size_t);     \
    template void dense_backward(const Matrix<T>&, std::span<const T>, const Matrix<T>&, Matrix<T>*,             \
                                 std::span<T>, std::span<T>);                                                    \
    template Matrix<T> relu_forward(const Matrix<T>&);                                                           \
    template Matrix<T> relu_backward(const Matrix<T>&, const Matrix<T>&);                                        \
    template std::vector<T> softmax(std::span<const T>);                                                         \
    template XentResult<T> softmax_xent(std::span<const T>, std::size_t);

SEMIMAGE_INSTANTIATE_KERNELS(float)
SEMIMAGE_INSTANTIATE_KERNELS(double)

}  // namespace semimage::nnet
