#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "semimage/nnet/tensor.hpp"

namespace semimage {

/// Multinomial logistic regression on standardized features, fitted by
/// full-batch Adam from a zero start. Deterministic.
class LinearProbe {
public:
    struct Options {
        std::size_t iterations = 400;
        double lr = 0.05;
        double l2 = 1e-4;
    };

    LinearProbe() = default;
    explicit LinearProbe(Options opt) : opt_(opt) {}

    void fit(const nnet::Matrix<double>& x, std::span<const std::size_t> labels, std::size_t num_classes);
    std::vector<std::size_t> predict(const nnet::Matrix<double>& x) const;
    double accuracy(const nnet::Matrix<double>& x, std::span<const std::size_t> labels) const;

private:
    Options opt_;
    std::size_t classes_ = 0;
    std::vector<double> mean_;
    std::vector<double> scale_;
    nnet::Matrix<double> w_;  // classes x (features + 1), last column is the bias
};

}  // namespace semimage
