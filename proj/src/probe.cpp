#include "semimage/probe.hpp"

#include <cmath>

#include "semimage/error.hpp"
#include "semimage/nnet/adam.hpp"
#include "semimage/nnet/kernels.hpp"

namespace semimage {

void LinearProbe::fit(const nnet::Matrix<double>& x, std::span<const std::size_t> labels, std::size_t num_classes) {
    if (x.rows != labels.size() || x.rows == 0) throw DataError("probe: need one label per row");
    classes_ = num_classes;
    const auto n = x.rows;
    const auto f = x.cols;
    mean_.assign(f, 0.0);
    scale_.assign(f, 1.0);
    for (std::size_t j = 0; j < f; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x(i, j);
        mean_[j] = s / static_cast<double>(n);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) v += (x(i, j) - mean_[j]) * (x(i, j) - mean_[j]);
        const double sd = std::sqrt(v / static_cast<double>(n));
        scale_[j] = sd > 1e-12 ? 1.0 / sd : 0.0;
    }
    w_ = nnet::Matrix<double>(classes_, f + 1);
    nnet::Matrix<double> grad(classes_, f + 1);
    nnet::AdamState<double> adam({opt_.lr, 0.9, 0.999, 1e-8}, {std::span<double>(w_.data)});
    std::vector<double> z(f + 1, 1.0);
    for (std::size_t it = 0; it < opt_.iterations; ++it) {
        std::fill(grad.data.begin(), grad.data.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < f; ++j) z[j] = (x(i, j) - mean_[j]) * scale_[j];
            std::vector<double> logits(classes_, 0.0);
            for (std::size_t k = 0; k < classes_; ++k) {
                for (std::size_t j = 0; j <= f; ++j) logits[k] += w_(k, j) * z[j];
            }
            const auto r = nnet::softmax_xent<double>(logits, labels[i]);
            for (std::size_t k = 0; k < classes_; ++k) {
                for (std::size_t j = 0; j <= f; ++j) grad(k, j) += r.grad[k] * z[j] / static_cast<double>(n);
            }
        }
        for (std::size_t k = 0; k < classes_; ++k) {
            for (std::size_t j = 0; j < f; ++j) grad(k, j) += opt_.l2 * w_(k, j);
        }
        nnet::adam_step<double>({std::span<double>(w_.data)}, {std::span<const double>(grad.data)}, adam);
    }
}

std::vector<std::size_t> LinearProbe::predict(const nnet::Matrix<double>& x) const {
    if (x.cols + 1 != w_.cols) throw DataError("probe: feature count differs from the fitted one");
    std::vector<std::size_t> out(x.rows);
    std::vector<double> logits(classes_);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t k = 0; k < classes_; ++k) {
            double s = w_(k, x.cols);
            for (std::size_t j = 0; j < x.cols; ++j) s += w_(k, j) * (x(i, j) - mean_[j]) * scale_[j];
            logits[k] = s;
        }
        out[i] = nnet::argmax(std::span<const double>(logits));
    }
    return out;
}

double LinearProbe::accuracy(const nnet::Matrix<double>& x, std::span<const std::size_t> labels) const {
    const auto pred = predict(x);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i] ? 1 : 0;
    return pred.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace semimage
