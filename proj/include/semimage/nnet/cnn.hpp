#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "semimage/nnet/kernels.hpp"
#include "semimage/nnet/tensor.hpp"

namespace semimage::nnet {

/// Plain CNN: blocks of conv(k x k, same padding) -> relu -> maxpool2, then
/// global average pooling, a relu hidden layer and one softmax head per entry
/// of num_classes (two heads for joint topic + sentiment prediction).
struct CnnConfig {
    std::size_t input_channels = 4;
    std::vector<std::size_t> blocks{16, 32};
    std::size_t kernel = 3;
    std::size_t head_hidden = 32;
    std::vector<std::size_t> num_classes{2};
    bool residual = false;  // reserved; must stay false

    void validate() const;
    /// "channels=4 blocks=16,32 kernel=3 head_hidden=32 classes=5,2 residual=0"
    std::string to_line() const;
    static CnnConfig from_line(const std::string& line);

    bool operator==(const CnnConfig&) const = default;
};

template <typename T>
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<T> w;  // out x in
    std::vector<T> b;

    DenseLayer() = default;
    DenseLayer(std::size_t in_, std::size_t out_) : in(in_), out(out_), w(in_ * out_, T(0)), b(out_, T(0)) {}

    /// Fan-balanced uniform weights, zero bias.
    void init(std::uint64_t seed);
    Matrix<T> forward(const Matrix<T>& x) const { return dense_forward<T>(x, w, b, out); }
    bool operator==(const DenseLayer&) const = default;
};

template <typename T>
struct ConvLayer {
    ConvGeometry geom;
    std::vector<T> w;
    std::vector<T> b;

    bool operator==(const ConvLayer&) const = default;
};

template <typename T>
class Cnn {
public:
    struct Tape {
        std::vector<Tensor4<T>> inputs;     // block inputs
        std::vector<Tensor4<T>> pre_relu;   // conv outputs
        std::vector<Tensor4<T>> post_relu;
        std::vector<std::vector<std::uint32_t>> argmax;
        Tensor4<T> last;                    // input of global pooling
        Matrix<T> pooled;
        Matrix<T> hidden_pre;
        Matrix<T> hidden;
    };

    Cnn() = default;
    /// All parameters zero.
    explicit Cnn(CnnConfig config);
    static Cnn init(const CnnConfig& config, std::uint64_t seed);

    const CnnConfig& config() const { return config_; }

    /// One logits matrix (batch x classes) per head.
    std::vector<Matrix<T>> forward(const Tensor4<T>& x, Tape* tape = nullptr) const;

    /// Accumulates parameter gradients into grad; returns dL/dx when need_dx.
    Tensor4<T> backward(const Tape& tape, const std::vector<Matrix<T>>& dlogits, Cnn& grad, bool need_dx) const;

    /// Parameter tensors in declaration (= checkpoint) order.
    std::vector<std::span<T>> tensors();
    std::vector<std::span<const T>> tensors() const;
    void set_zero();

    std::vector<ConvLayer<T>>& convs() { return convs_; }
    DenseLayer<T>& hidden() { return hidden_; }
    std::vector<DenseLayer<T>>& heads() { return heads_; }

    template <typename U>
    Cnn<U> cast() const;

    bool operator==(const Cnn&) const = default;

private:
    template <typename>
    friend class Cnn;

    CnnConfig config_;
    std::vector<ConvLayer<T>> convs_;
    DenseLayer<T> hidden_;
    std::vector<DenseLayer<T>> heads_;
};

/// "SEMI-CNN v1" line, the config line, then float32 parameters in
/// declaration order (little-endian).
void write_cnn(std::ostream& out, const Cnn<float>& cnn);
Cnn<float> read_cnn(std::istream& in);

}  // namespace semimage::nnet
