#include <gtest/gtest.h>

#include "semimage/error.hpp"
#include "semimage/nnet/adam.hpp"
#include "semimage/nnet/kernels.hpp"
#include "semimage/nnet/reference.hpp"
#include "support.hpp"

using namespace semimage;
using namespace semimage::nnet;
namespace st = semimage::testing;

namespace {

constexpr int kInstances = 20;
constexpr double kTol = 1e-4;

// Scalar probe L = sum(y * r) so that dL/dy = r.
double probe(const std::vector<double>& y, const std::vector<double>& r) { return st::dot(y, r); }

// Naive 6-deep loop, written independently of both library versions.
Tensor4<double> naive_conv(const Tensor4<double>& x, const std::vector<double>& w, const std::vector<double>& b,
                           const ConvGeometry& g) {
    const auto oh = (x.h + 2 * g.padding - g.kernel) / g.stride + 1;
    const auto ow = (x.w + 2 * g.padding - g.kernel) / g.stride + 1;
    Tensor4<double> y(x.n, g.out_channels, oh, ow);
    for (std::size_t n = 0; n < x.n; ++n)
        for (std::size_t o = 0; o < g.out_channels; ++o)
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j) {
                    double s = b[o];
                    for (std::size_t c = 0; c < x.c; ++c)
                        for (std::size_t ki = 0; ki < g.kernel; ++ki)
                            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                                const long r = static_cast<long>(i * g.stride + ki) - static_cast<long>(g.padding);
                                const long q = static_cast<long>(j * g.stride + kj) - static_cast<long>(g.padding);
                                if (r < 0 || q < 0 || r >= static_cast<long>(x.h) || q >= static_cast<long>(x.w))
                                    continue;
                                s += w[((o * x.c + c) * g.kernel + ki) * g.kernel + kj] * x(n, c, r, q);
                            }
                    y(n, o, i, j) = s;
                }
    return y;
}

}  // namespace

TEST(Conv2d, OnesKernelCenterIsNine) {
    Tensor4<double> x(1, 1, 3, 3);
    std::fill(x.data.begin(), x.data.end(), 1.0);
    const std::vector<double> w(9, 1.0), b{0.0};
    const auto y = conv2d_forward<double>(x, w, b, ConvGeometry{1, 1, 3, 1, 1});
    ASSERT_EQ(y.h, 3u);
    EXPECT_EQ(y(0, 0, 1, 1), 9.0);
    EXPECT_EQ(y(0, 0, 0, 0), 4.0);
    EXPECT_EQ(y(0, 0, 0, 1), 6.0);
}

TEST(Conv2d, IdentityKernel) {
    Rng rng(1);
    const auto x = st::random_tensor(rng, 2, 1, 5, 7);
    std::vector<double> w(9, 0.0);
    w[4] = 1.0;
    const std::vector<double> b{0.0};
    const auto y = conv2d_forward<double>(x, w, b, ConvGeometry{1, 1, 3, 1, 1});
    EXPECT_EQ(y.data, x.data);
}

TEST(Conv2d, MatchesNaiveLoopExactly) {
    Rng rng(2);
    for (int t = 0; t < 30; ++t) {
        ConvGeometry g;
        g.in_channels = 1 + uniform_index(rng, 4);
        g.out_channels = 1 + uniform_index(rng, 5);
        g.kernel = t % 5 == 0 ? 1 : 3;
        g.stride = 1 + uniform_index(rng, 2);
        g.padding = g.kernel / 2;
        const auto x = st::random_tensor(rng, 1 + uniform_index(rng, 2), g.in_channels, 1 + uniform_index(rng, 12),
                                         1 + uniform_index(rng, 12));
        const auto w = st::random_vector(rng, g.weight_count());
        const auto b = st::random_vector(rng, g.out_channels);
        const auto want = naive_conv(x, w, b, g);
        EXPECT_EQ(conv2d_forward<double>(x, w, b, g).data, want.data) << "case " << t;
        EXPECT_EQ(reference::conv2d_forward<double>(x, w, b, g).data, want.data) << "case " << t;
    }
}

TEST(Conv2d, BackwardMatchesReferenceExactly) {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        ConvGeometry g{1 + uniform_index(rng, 3), 1 + uniform_index(rng, 3), 3, 1 + uniform_index(rng, 2), 1};
        const auto x = st::random_tensor(rng, 2, g.in_channels, 3 + uniform_index(rng, 6), 3 + uniform_index(rng, 6));
        const auto w = st::random_vector(rng, g.weight_count());
        const std::vector<double> b(g.out_channels, 0.1);
        const auto y = conv2d_forward<double>(x, w, b, g);
        const auto dy = st::random_tensor(rng, y.n, y.c, y.h, y.w);
        Tensor4<double> dx1, dx2;
        std::vector<double> dw1(w.size()), dw2(w.size()), db1(b.size()), db2(b.size());
        conv2d_backward<double>(x, w, dy, g, &dx1, dw1, db1);
        reference::conv2d_backward<double>(x, w, dy, g, &dx2, dw2, db2);
        EXPECT_EQ(dx1.data, dx2.data);
        EXPECT_EQ(dw1, dw2);
        EXPECT_EQ(db1, db2);
    }
}

TEST(Conv2d, ShapeErrors) {
    Tensor4<double> x(1, 2, 4, 4);
    const std::vector<double> w(9, 0.0), b{0.0};
    EXPECT_THROW(conv2d_forward<double>(x, w, b, ConvGeometry{1, 1, 3, 1, 1}), DataError);
    Tensor4<double> tiny(1, 1, 1, 1);
    EXPECT_THROW(conv2d_forward<double>(tiny, w, b, ConvGeometry{1, 1, 3, 1, 0}), DataError);
}

TEST(Conv2d, FiniteDifferences) {
    Rng rng(4);
    for (int t = 0; t < kInstances; ++t) {
        ConvGeometry g{1 + uniform_index(rng, 3), 1 + uniform_index(rng, 3), 3, 1 + uniform_index(rng, 2), 1};
        auto x = st::random_tensor(rng, 2, g.in_channels, 2 + uniform_index(rng, 5), 2 + uniform_index(rng, 5));
        auto w = st::random_vector(rng, g.weight_count());
        auto b = st::random_vector(rng, g.out_channels);
        const auto y0 = conv2d_forward<double>(x, w, b, g);
        const auto r = st::random_vector(rng, y0.size());
        auto f = [&] { return probe(conv2d_forward<double>(x, w, b, g).data, r); };
        Tensor4<double> dy(y0.n, y0.c, y0.h, y0.w);
        dy.data = r;
        Tensor4<double> dx;
        std::vector<double> dw(w.size()), db(b.size());
        conv2d_backward<double>(x, w, dy, g, &dx, dw, db);
        EXPECT_LE(st::relative_error(dx.data, st::numeric_gradient(x.data, f)), kTol);
        EXPECT_LE(st::relative_error(dw, st::numeric_gradient(w, f)), kTol);
        EXPECT_LE(st::relative_error(db, st::numeric_gradient(b, f)), kTol);
    }
}

TEST(Relu, ForwardBackward) {
    Tensor4<double> x(1, 1, 1, 4);
    x.data = {-2.0, -0.5, 0.5, 3.0};
    const auto y = relu_forward(x);
    EXPECT_EQ(y.data, (std::vector<double>{0.0, 0.0, 0.5, 3.0}));
    Tensor4<double> dy(1, 1, 1, 4);
    dy.data = {1.0, 1.0, 1.0, 1.0};
    EXPECT_EQ(relu_backward(x, dy).data, (std::vector<double>{0.0, 0.0, 1.0, 1.0}));

    Rng rng(5);
    for (int t = 0; t < kInstances; ++t) {
        auto m = st::random_matrix(rng, 3, 5);
        for (auto& v : m.data) v = v >= 0 ? v + 0.05 : v - 0.05;  // stay off the kink
        const auto r = st::random_vector(rng, m.data.size());
        auto f = [&] { return probe(relu_forward(m).data, r); };
        Matrix<double> dm(3, 5);
        dm.data = r;
        EXPECT_LE(st::relative_error(relu_backward(m, dm).data, st::numeric_gradient(m.data, f)), kTol);
    }
}

TEST(MaxPool, TwoByTwo) {
    Tensor4<double> x(1, 1, 2, 2);
    x.data = {1.0, 2.0, 3.0, 4.0};
    const auto p = maxpool2_forward(x);
    ASSERT_EQ(p.y.size(), 1u);
    EXPECT_EQ(p.y.data[0], 4.0);
    Tensor4<double> dy(1, 1, 1, 1);
    dy.data[0] = 1.0;
    EXPECT_EQ(maxpool2_backward(dy, p.argmax, x).data, (std::vector<double>{0.0, 0.0, 0.0, 1.0}));
}

TEST(MaxPool, TiesGoToFirstAndCeilMode) {
    Tensor4<double> x(1, 1, 3, 3);
    x.data = {5, 5, 1,
              5, 5, 2,
              7, 0, 9};
    const auto p = maxpool2_forward(x);
    ASSERT_EQ(p.y.h, 2u);
    ASSERT_EQ(p.y.w, 2u);
    EXPECT_EQ(p.y.data, (std::vector<double>{5, 2, 7, 9}));
    EXPECT_EQ(p.argmax[0], 0u);
    EXPECT_EQ(p.argmax[1], 5u);
    EXPECT_EQ(p.argmax[2], 6u);
    EXPECT_EQ(p.argmax[3], 8u);
}

TEST(MaxPool, FiniteDifferences) {
    Rng rng(6);
    for (int t = 0; t < kInstances; ++t) {
        auto x = st::random_tensor(rng, 2, 2, 1 + uniform_index(rng, 6), 1 + uniform_index(rng, 6));
        const auto p = maxpool2_forward(x);
        const auto r = st::random_vector(rng, p.y.size());
        auto f = [&] { return probe(maxpool2_forward(x).y.data, r); };
        Tensor4<double> dy = p.y;
        dy.data = r;
        EXPECT_LE(st::relative_error(maxpool2_backward(dy, p.argmax, x).data, st::numeric_gradient(x.data, f)), kTol);
    }
}

TEST(GlobalAvgPool, FiniteDifferences) {
    Rng rng(7);
    for (int t = 0; t < kInstances; ++t) {
        auto x = st::random_tensor(rng, 2, 3, 1 + uniform_index(rng, 5), 1 + uniform_index(rng, 5));
        const auto y = global_avg_pool_forward(x);
        ASSERT_EQ(y.rows, 2u);
        ASSERT_EQ(y.cols, 3u);
        const auto r = st::random_vector(rng, y.data.size());
        auto f = [&] { return probe(global_avg_pool_forward(x).data, r); };
        Matrix<double> dy(2, 3);
        dy.data = r;
        EXPECT_LE(st::relative_error(global_avg_pool_backward(dy, x).data, st::numeric_gradient(x.data, f)), kTol);
    }
}

TEST(Dense, ZeroWeightsGiveBias) {
    Matrix<double> x(2, 3);
    x.data = {1, 2, 3, 4, 5, 6};
    const std::vector<double> w(6, 0.0), b{0.5, -1.5};
    const auto y = dense_forward<double>(x, w, b, 2);
    EXPECT_EQ(y.data, (std::vector<double>{0.5, -1.5, 0.5, -1.5}));
}

TEST(Dense, MatchesReferenceAndFiniteDifferences) {
    Rng rng(8);
    for (int t = 0; t < kInstances; ++t) {
        const std::size_t in = 1 + uniform_index(rng, 6), out = 1 + uniform_index(rng, 5);
        auto x = st::random_matrix(rng, 3, in);
        auto w = st::random_vector(rng, in * out);
        auto b = st::random_vector(rng, out);
        EXPECT_EQ(dense_forward<double>(x, w, b, out).data, reference::dense_forward<double>(x, w, b, out).data);
        const auto r = st::random_vector(rng, 3 * out);
        auto f = [&] { return probe(dense_forward<double>(x, w, b, out).data, r); };
        Matrix<double> dy(3, out), dx;
        dy.data = r;
        std::vector<double> dw(w.size()), db(b.size());
        dense_backward<double>(x, w, dy, &dx, dw, db);
        EXPECT_LE(st::relative_error(dx.data, st::numeric_gradient(x.data, f)), kTol);
        EXPECT_LE(st::relative_error(dw, st::numeric_gradient(w, f)), kTol);
        EXPECT_LE(st::relative_error(db, st::numeric_gradient(b, f)), kTol);
    }
}

TEST(SoftmaxXent, UniformLogitsGiveLogK) {
    for (std::size_t k : {2u, 5u, 10u}) {
        const std::vector<double> logits(k, 0.3);
        EXPECT_NEAR(softmax_xent<double>(logits, 1).loss, std::log(static_cast<double>(k)), 1e-15);
    }
}

TEST(SoftmaxXent, LargeLogitsStable) {
    const std::vector<double> logits{1000.0, 0.0};
    const auto r = softmax_xent<double>(logits, 0);
    EXPECT_TRUE(std::isfinite(r.loss));
    EXPECT_NEAR(r.loss, 0.0, 1e-12);
    const auto rf = softmax_xent<float>(std::vector<float>{1000.0f, 0.0f}, 1);
    EXPECT_NEAR(rf.loss, 1000.0f, 1e-3f);
    for (float g : rf.grad) EXPECT_TRUE(std::isfinite(g));
}

TEST(SoftmaxXent, InvalidTarget) { EXPECT_THROW(softmax_xent<double>(std::vector<double>{1, 2}, 2), DataError); }

TEST(SoftmaxXent, FiniteDifferences) {
    Rng rng(9);
    for (int t = 0; t < kInstances; ++t) {
        const std::size_t k = 2 + uniform_index(rng, 6);
        auto logits = st::random_vector(rng, k, -3.0, 3.0);
        const auto target = uniform_index(rng, k);
        const auto r = softmax_xent<double>(logits, target);
        const auto num = st::numeric_gradient(logits, [&] { return softmax_xent<double>(logits, target).loss; });
        EXPECT_LE(st::relative_error(r.grad, num), 1e-6);
    }
}

TEST(Adam, ZeroGradientLeavesParams) {
    std::vector<double> w{0.5, -2.0};
    const std::vector<double> g{0.0, 0.0};
    AdamState<double> state(AdamConfig{0.1}, {std::span<double>(w)});
    adam_step<double>({std::span<double>(w)}, {std::span<const double>(g)}, state);
    EXPECT_EQ(w, (std::vector<double>{0.5, -2.0}));
    EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepBound) {
    Rng rng(10);
    const double lr = 0.01;
    auto w = st::random_vector(rng, 50);
    const auto g = st::random_vector(rng, 50, -5.0, 5.0);
    const auto before = w;
    AdamState<double> state(AdamConfig{lr}, {std::span<double>(w)});
    adam_step<double>({std::span<double>(w)}, {std::span<const double>(g)}, state);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double delta = w[i] - before[i];
        EXPECT_LE(std::abs(delta), lr * (1.0 + 1e-9));
        EXPECT_NEAR(delta, -lr * (g[i] > 0 ? 1.0 : -1.0), lr * 1e-6);
    }
}

TEST(Adam, QuadraticConverges) {
    std::vector<double> w{1.0};
    AdamState<double> state(AdamConfig{0.1}, {std::span<double>(w)});
    // independent scalar recurrence alongside
    double x = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 200; ++t) {
        const std::vector<double> g{2.0 * w[0]};
        adam_step<double>({std::span<double>(w)}, {std::span<const double>(g)}, state);
        const double gx = 2.0 * x;
        m = 0.9 * m + 0.1 * gx;
        v = 0.999 * v + 0.001 * gx * gx;
        x -= 0.1 * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
    }
    EXPECT_LT(std::abs(w[0]), 0.05);
    EXPECT_NEAR(w[0], x, 1e-12);
}

TEST(Adam, CountMismatch) {
    std::vector<double> w{1.0};
    AdamState<double> state(AdamConfig{}, {std::span<double>(w)});
    EXPECT_THROW(adam_step<double>({std::span<double>(w)}, {}, state), DataError);
}
