#include "semimage/nnet/reference.hpp"

#include "semimage/error.hpp"

namespace semimage::nnet::reference {

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, std::span<const T> w, std::span<const T> b, const ConvGeometry& g) {
    g.check_input(x.c, x.h, x.w);
    if (w.size() != g.weight_count() || b.size() != g.out_channels) throw DataError("conv2d: parameter shape mismatch");
    const auto k = g.kernel;
    Tensor4<T> y(x.n, g.out_channels, g.out_size(x.h), g.out_size(x.w));
    for (std::size_t n = 0; n < x.n; ++n)
        for (std::size_t oc = 0; oc < y.c; ++oc)
            for (std::size_t oh = 0; oh < y.h; ++oh)
                for (std::size_t ow = 0; ow < y.w; ++ow) {
                    T acc = b[oc];
                    for (std::size_t ic = 0; ic < x.c; ++ic)
                        for (std::size_t kh = 0; kh < k; ++kh)
                            for (std::size_t kw = 0; kw < k; ++kw) {
                                const auto ih = static_cast<long long>(oh * g.stride + kh) - static_cast<long long>(g.padding);
                                const auto iw = static_cast<long long>(ow * g.stride + kw) - static_cast<long long>(g.padding);
                                if (ih < 0 || iw < 0 || ih >= static_cast<long long>(x.h) ||
                                    iw >= static_cast<long long>(x.w))
                                    continue;
                                acc += x(n, ic, ih, iw) * w[((oc * x.c + ic) * k + kh) * k + kw];
                            }
                    y(n, oc, oh, ow) = acc;
                }
    return y;
}

template <typename T>
void conv2d_backward(const Tensor4<T>& x, std::span<const T> w, const Tensor4<T>& dy, const ConvGeometry& g,
                     Tensor4<T>* dx, std::span<T> dw, std::span<T> db) {
    g.check_input(x.c, x.h, x.w);
    if (dy.n != x.n || dy.c != g.out_channels || dy.h != g.out_size(x.h) || dy.w != g.out_size(x.w))
        throw DataError("conv2d backward: gradient shape mismatch");
    if (dx) *dx = Tensor4<T>(x.n, x.c, x.h, x.w);
    const auto k = g.kernel;
    const auto s = static_cast<long long>(g.stride);
    const auto p = static_cast<long long>(g.padding);
    // Each gradient entry is a sum over the batch of per-sample sums, taken
    // in row-major order of the output positions that touch it.
    for (std::size_t n = 0; n < x.n; ++n) {
        for (std::size_t oc = 0; oc < dy.c; ++oc) {
            T sum = 0;
            for (std::size_t oh = 0; oh < dy.h; ++oh)
                for (std::size_t ow = 0; ow < dy.w; ++ow) sum += dy(n, oc, oh, ow);
            db[oc] += sum;
        }
        for (std::size_t oc = 0; oc < dy.c; ++oc)
            for (std::size_t ic = 0; ic < x.c; ++ic)
                for (std::size_t kh = 0; kh < k; ++kh)
                    for (std::size_t kw = 0; kw < k; ++kw) {
                        T acc = 0;
                        for (std::size_t oh = 0; oh < dy.h; ++oh)
                            for (std::size_t ow = 0; ow < dy.w; ++ow) {
                                const auto ih = static_cast<long long>(oh) * s + static_cast<long long>(kh) - p;
                                const auto iw = static_cast<long long>(ow) * s + static_cast<long long>(kw) - p;
                                if (ih < 0 || iw < 0 || ih >= static_cast<long long>(x.h) ||
                                    iw >= static_cast<long long>(x.w))
                                    continue;
                                acc += dy(n, oc, oh, ow) * x(n, ic, ih, iw);
                            }
                        dw[((oc * x.c + ic) * k + kh) * k + kw] += acc;
                    }
        if (!dx) continue;
        for (std::size_t ic = 0; ic < x.c; ++ic)
            for (std::size_t ih = 0; ih < x.h; ++ih)
                for (std::size_t iw = 0; iw < x.w; ++iw) {
                    T acc = 0;
                    for (std::size_t oc = 0; oc < dy.c; ++oc)
                        for (std::size_t kh = 0; kh < k; ++kh)
                            for (std::size_t kw = 0; kw < k; ++kw) {
                                const auto th = static_cast<long long>(ih) + p - static_cast<long long>(kh);
                                const auto tw = static_cast<long long>(iw) + p - static_cast<long long>(kw);
                                if (th < 0 || tw < 0 || th % s != 0 || tw % s != 0) continue;
                                const auto oh = th / s, ow = tw / s;
                                if (oh >= static_cast<long long>(dy.h) || ow >= static_cast<long long>(dy.w)) continue;
                                acc += w[((oc * x.c + ic) * k + kh) * k + kw] * dy(n, oc, oh, ow);
                            }
                    (*dx)(n, ic, ih, iw) = acc;
                }
    }
}

template <typename T>
Matrix<T> dense_forward(const Matrix<T>& x, std::span<const T> w, std::span<const T> b, std::size_t out) {
    Matrix<T> y(x.rows, out);
    for (std::size_t r = 0; r < x.rows; ++r)
        for (std::size_t o = 0; o < out; ++o) {
            T acc = b[o];
            for (std::size_t i = 0; i < x.cols; ++i) acc += w[o * x.cols + i] * x(r, i);
            y(r, o) = acc;
        }
    return y;
}

template Tensor4<float> conv2d_forward(const Tensor4<float>&, std::span<const float>, std::span<const float>,
                                       const ConvGeometry&);
template Tensor4<double> conv2d_forward(const Tensor4<double>&, std::span<const double>, std::span<const double>,
                                        const ConvGeometry&);
template void conv2d_backward(const Tensor4<float>&, std::span<const float>, const Tensor4<float>&,
                              const ConvGeometry&, Tensor4<float>*, std::span<float>, std::span<float>);
template void conv2d_backward(const Tensor4<double>&, std::span<const double>, const Tensor4<double>&,
                              const ConvGeometry&, Tensor4<double>*, std::span<double>, std::span<double>);
template Matrix<float> dense_forward(const Matrix<float>&, std::span<const float>, std::span<const float>, std::size_t);
template Matrix<double> dense_forward(const Matrix<double>&, std::span<const double>, std::span<const double>,
                                      std::size_t);

}  // namespace semimage::nnet::reference
