#pragma once

// Word embedding -> pixel mapping.
//
// HSV space (the default): hidden = tanh(W_hidden e + b_hidden), then
//   h_cos = tanh(w_Hc . hidden + b_Hc)     h_sin = tanh(w_Hs . hidden + b_Hs)
//   sat   = sigmoid(w_S . hidden + b_S)    val   = sigmoid(w_V . hidden + b_V)
// With hidden_dim == 0 the heads read e directly.
//
// RGB space (ablation): same hidden layer, three unconstrained sigmoid heads.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "semimage/error.hpp"
#include "semimage/rng.hpp"

namespace semimage {

enum class PixelSpace { hsv, rgb };

constexpr std::size_t channel_count(PixelSpace space) { return space == PixelSpace::hsv ? 4 : 3; }

struct Pixel {
    double h_cos = 0.0;
    double h_sin = 0.0;
    double sat = 0.0;
    double val = 0.0;

    bool operator==(const Pixel&) const = default;
};

namespace channel {
inline constexpr std::size_t h_cos = 0;
inline constexpr std::size_t h_sin = 1;
inline constexpr std::size_t sat = 2;
inline constexpr std::size_t val = 3;
}  // namespace channel

template <typename T>
T sigmoid(T x) {
    // Two branches keep exp() from overflowing for large |x|.
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T z = std::exp(x);
    return z / (T(1) + z);
}

template <typename T>
struct MapperParams {
    PixelSpace space = PixelSpace::hsv;
    std::size_t d = 0;
    std::size_t h = 0;
    std::vector<T> w_hidden;  // h x d
    std::vector<T> b_hidden;  // h
    std::vector<T> w_head;    // channels x head_in, rows Hc, Hs, S, V (or R, G, B)
    std::vector<T> b_head;    // channels

    std::size_t channels() const { return channel_count(space); }
    std::size_t head_in() const { return h > 0 ? h : d; }

    static MapperParams zeros(PixelSpace space, std::size_t d, std::size_t h) {
        if (d == 0) throw DataError("mapper input dimension must be >= 1");
        MapperParams p;
        p.space = space;
        p.d = d;
        p.h = h;
        p.w_hidden.assign(h * d, T(0));
        p.b_hidden.assign(h, T(0));
        p.w_head.assign(p.channels() * p.head_in(), T(0));
        p.b_head.assign(p.channels(), T(0));
        return p;
    }

    std::span<T> head_weights(std::size_t c) { return {w_head.data() + c * head_in(), head_in()}; }
    std::span<const T> head_weights(std::size_t c) const { return {w_head.data() + c * head_in(), head_in()}; }

    /// Parameter tensors in checkpoint / optimizer order.
    std::array<std::span<T>, 4> tensors() { return {w_hidden, b_hidden, w_head, b_head}; }
    std::array<std::span<const T>, 4> tensors() const { return {w_hidden, b_hidden, w_head, b_head}; }

    void set_zero() {
        for (auto t : tensors()) std::fill(t.begin(), t.end(), T(0));
    }

    MapperParams& operator+=(const MapperParams& other) {
        auto dst = tensors();
        const auto src = other.tensors();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            if (dst[i].size() != src[i].size()) throw DataError("mapper gradient shape mismatch");
            for (std::size_t k = 0; k < dst[i].size(); ++k) dst[i][k] += src[i][k];
        }
        return *this;
    }

    template <typename U>
    MapperParams<U> cast() const {
        MapperParams<U> out;
        out.space = space;
        out.d = d;
        out.h = h;
        out.w_hidden.assign(w_hidden.begin(), w_hidden.end());
        out.b_hidden.assign(b_hidden.begin(), b_hidden.end());
        out.w_head.assign(w_head.begin(), w_head.end());
        out.b_head.assign(b_head.begin(), b_head.end());
        return out;
    }

    bool operator==(const MapperParams&) const = default;
};

template <typename T>
using ColorMapperParams = MapperParams<T>;

/// Values cached by the forward pass for the backward pass.
template <typename T>
struct MapperCache {
    std::vector<T> input;              // e
    std::vector<T> hidden;             // tanh activations (empty when h == 0)
    std::array<T, 4> out{};            // post-activation channel values
};

/// Channel values in [-1,1]^2 x [0,1]^2 (HSV) or [0,1]^3 (RGB; fourth slot 0).
template <typename T, typename E>
std::array<T, 4> cm_forward(const MapperParams<T>& p, std::span<const E> e, MapperCache<T>* cache = nullptr) {
    if (e.size() != p.d)
        throw DataError("color mapper: embedding has dimension " + std::to_string(e.size()) + ", expected " +
                        std::to_string(p.d));
    thread_local std::vector<T> scratch_in;
    thread_local std::vector<T> scratch_hidden;
    auto& in = cache ? cache->input : scratch_in;
    in.assign(e.begin(), e.end());

    const T* head_input = in.data();
    if (p.h > 0) {
        auto& hidden = cache ? cache->hidden : scratch_hidden;
        hidden.resize(p.h);
        for (std::size_t j = 0; j < p.h; ++j) {
            T z = p.b_hidden[j];
            const T* row = p.w_hidden.data() + j * p.d;
            for (std::size_t k = 0; k < p.d; ++k) z += row[k] * in[k];
            hidden[j] = std::tanh(z);
        }
        head_input = hidden.data();
    } else if (cache) {
        cache->hidden.clear();
    }

    std::array<T, 4> out{};
    const auto k_in = p.head_in();
    for (std::size_t c = 0; c < p.channels(); ++c) {
        T z = p.b_head[c];
        const T* w = p.w_head.data() + c * k_in;
        for (std::size_t k = 0; k < k_in; ++k) z += w[k] * head_input[k];
        const bool tanh_head = p.space == PixelSpace::hsv && c < 2;
        out[c] = tanh_head ? std::tanh(z) : sigmoid(z);
    }
    if (cache) cache->out = out;
    return out;
}

template <typename T>
Pixel to_pixel(const std::array<T, 4>& v) {
    return {static_cast<double>(v[0]), static_cast<double>(v[1]), static_cast<double>(v[2]),
            static_cast<double>(v[3])};
}

/// Accumulates dL/dtheta into grad given dL/d(channel outputs).
template <typename T>
void cm_backward_into(const MapperParams<T>& p, const MapperCache<T>& cache, std::span<const T> grad_out,
                      MapperParams<T>& grad) {
    if (grad_out.size() < p.channels() || cache.input.size() != p.d || (p.h > 0 && cache.hidden.size() != p.h) ||
        grad.w_head.size() != p.w_head.size() || grad.w_hidden.size() != p.w_hidden.size())
        throw DataError("color mapper backward: shape mismatch");
    const auto k_in = p.head_in();
    const T* head_input = p.h > 0 ? cache.hidden.data() : cache.input.data();

    std::array<T, 4> g{};
    for (std::size_t c = 0; c < p.channels(); ++c) {
        const T y = cache.out[c];
        const bool tanh_head = p.space == PixelSpace::hsv && c < 2;
        g[c] = grad_out[c] * (tanh_head ? T(1) - y * y : y * (T(1) - y));
        grad.b_head[c] += g[c];
        T* gw = grad.w_head.data() + c * k_in;
        for (std::size_t k = 0; k < k_in; ++k) gw[k] += g[c] * head_input[k];
    }
    if (p.h == 0) return;
    for (std::size_t j = 0; j < p.h; ++j) {
        T da = 0;
        for (std::size_t c = 0; c < p.channels(); ++c) da += g[c] * p.w_head[c * k_in + j];
        const T a = cache.hidden[j];
        const T dz = da * (T(1) - a * a);
        grad.b_hidden[j] += dz;
        T* gw = grad.w_hidden.data() + j * p.d;
        for (std::size_t k = 0; k < p.d; ++k) gw[k] += dz * cache.input[k];
    }
}

template <typename T>
MapperParams<T> cm_backward(const MapperParams<T>& p, const MapperCache<T>& cache, std::span<const T> grad_out) {
    auto grad = MapperParams<T>::zeros(p.space, p.d, p.h);
    cm_backward_into(p, cache, grad_out, grad);
    return grad;
}

/// Fan-balanced uniform weights, zero biases. The heads count as one layer
/// of fan-out `channels`.
template <typename T>
MapperParams<T> cm_init(std::size_t d, std::size_t hidden_dim, std::uint64_t seed,
                        PixelSpace space = PixelSpace::hsv) {
    auto p = MapperParams<T>::zeros(space, d, hidden_dim);
    Rng rng(seed);
    const double hidden_bound = hidden_dim > 0 ? std::sqrt(6.0 / static_cast<double>(d + hidden_dim)) : 0.0;
    for (auto& w : p.w_hidden) w = static_cast<T>(uniform(rng, -hidden_bound, hidden_bound));
    const double head_bound = std::sqrt(6.0 / static_cast<double>(p.head_in() + p.channels()));
    for (auto& w : p.w_head) w = static_cast<T>(uniform(rng, -head_bound, head_bound));
    return p;
}

/// Checkpoint: text header line "SEMI-CM v1 d=<d> h=<h>" ("SEMI-RGB" for the
/// RGB mapper) followed by little-endian float32 values in the order
/// w_hidden (row-major h x d), b_hidden, w_head (rows Hc, Hs, S, V), b_head.
void write_mapper(std::ostream& out, const MapperParams<float>& p);
MapperParams<float> read_mapper(std::istream& in);
void save_mapper(const std::filesystem::path& path, const MapperParams<float>& p);
MapperParams<float> load_mapper(const std::filesystem::path& path);

}  // namespace semimage
