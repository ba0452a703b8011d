#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "semimage/error.hpp"

namespace semimage::nnet {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;

    AdamState() = default;
    AdamState(AdamConfig cfg, const std::vector<std::span<T>>& params) : config(cfg) {
        for (const auto p : params) {
            m.emplace_back(p.size(), T(0));
            v.emplace_back(p.size(), T(0));
        }
    }
};

/// One bias-corrected Adam update over every parameter tensor.
template <typename T>
void adam_step(const std::vector<std::span<T>>& params, const std::vector<std::span<const T>>& grads,
               AdamState<T>& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw DataError("adam: parameter/gradient/state count mismatch");
    ++state.step;
    const auto& c = state.config;
    const double t = static_cast<double>(state.step);
    const double corr1 = 1.0 - std::pow(c.beta1, t);
    const double corr2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i];
        auto g = grads[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        if (p.size() != g.size() || p.size() != m.size()) throw DataError("adam: tensor shape mismatch");
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double gk = g[k];
            const double mk = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
            const double vk = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
            m[k] = static_cast<T>(mk);
            v[k] = static_cast<T>(vk);
            const double m_hat = mk / corr1;
            const double v_hat = vk / corr2;
            p[k] = static_cast<T>(p[k] - c.lr * m_hat / (std::sqrt(v_hat) + c.eps));
        }
    }
}

}  // namespace semimage::nnet
