#include "semimage/nnet/cnn.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "semimage/binary_io.hpp"
#include "semimage/error.hpp"
#include "semimage/rng.hpp"

namespace semimage::nnet {
namespace {

std::string join(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::vector<std::size_t> split_counts(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoul(item));
    return out;
}

template <typename T>
void fill_uniform(std::vector<T>& v, double bound, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& x : v) x = static_cast<T>(uniform(rng, -bound, bound));
}

}  // namespace

void CnnConfig::validate() const {
    if (input_channels == 0) throw UsageError("cnn: input_channels must be positive");
    if (blocks.empty()) throw UsageError("cnn: at least one conv block is required");
    for (const auto b : blocks) {
        if (b == 0) throw UsageError("cnn: block widths must be positive");
    }
    if (kernel % 2 == 0) throw UsageError("cnn: kernel size must be odd");
    if (head_hidden == 0) throw UsageError("cnn: head_hidden must be positive");
    if (num_classes.empty()) throw UsageError("cnn: at least one output head is required");
    for (const auto k : num_classes) {
        if (k < 2) throw UsageError("cnn: every head needs at least two classes");
    }
    if (residual) throw UsageError("cnn: residual blocks are not supported");
}

std::string CnnConfig::to_line() const {
    return "channels=" + std::to_string(input_channels) + " blocks=" + join(blocks) + " kernel=" +
           std::to_string(kernel) + " head_hidden=" + std::to_string(head_hidden) + " classes=" + join(num_classes) +
           " residual=" + (residual ? "1" : "0");
}

CnnConfig CnnConfig::from_line(const std::string& line) {
    const auto h = io::HeaderLine::parse(line);
    CnnConfig c;
    c.input_channels = h.count("channels");
    c.blocks = split_counts(h.at("blocks"));
    c.kernel = h.count("kernel");
    c.head_hidden = h.count("head_hidden");
    c.num_classes = split_counts(h.at("classes"));
    c.residual = h.at("residual") == "1";
    return c;
}

template <typename T>
void DenseLayer<T>::init(std::uint64_t seed) {
    fill_uniform(w, std::sqrt(6.0 / static_cast<double>(in + out)), seed);
    std::fill(b.begin(), b.end(), T(0));
}

template <typename T>
Cnn<T>::Cnn(CnnConfig config) : config_(std::move(config)) {
    config_.validate();
    std::size_t in = config_.input_channels;
    for (const auto out : config_.blocks) {
        ConvLayer<T> layer;
        layer.geom = ConvGeometry{in, out, config_.kernel, 1, config_.kernel / 2};
        layer.w.assign(layer.geom.weight_count(), T(0));
        layer.b.assign(out, T(0));
        convs_.push_back(std::move(layer));
        in = out;
    }
    hidden_ = DenseLayer<T>(in, config_.head_hidden);
    for (const auto k : config_.num_classes) heads_.emplace_back(config_.head_hidden, k);
}

template <typename T>
Cnn<T> Cnn<T>::init(const CnnConfig& config, std::uint64_t seed) {
    Cnn cnn(config);
    std::uint64_t stream = 0;
    for (auto& c : cnn.convs_) {
        // He-uniform for relu layers.
        const double fan_in = static_cast<double>(c.geom.in_channels * c.geom.kernel * c.geom.kernel);
        fill_uniform(c.w, std::sqrt(6.0 / fan_in), mix_seed(seed, stream++));
    }
    fill_uniform(cnn.hidden_.w, std::sqrt(6.0 / static_cast<double>(cnn.hidden_.in)), mix_seed(seed, stream++));
    for (auto& head : cnn.heads_) head.init(mix_seed(seed, stream++));
    return cnn;
}

template <typename T>
std::vector<Matrix<T>> Cnn<T>::forward(const Tensor4<T>& x, Tape* tape) const {
    if (x.c != config_.input_channels)
        throw DataError("cnn: input has " + std::to_string(x.c) + " channels, expected " +
                        std::to_string(config_.input_channels));
    Tensor4<T> cur = x;
    if (tape) *tape = Tape{};
    for (const auto& conv : convs_) {
        auto pre = conv2d_forward<T>(cur, conv.w, conv.b, conv.geom);
        auto post = relu_forward(pre);
        auto pooled = maxpool2_forward(post);
        if (tape) {
            tape->inputs.push_back(std::move(cur));
            tape->pre_relu.push_back(std::move(pre));
            tape->post_relu.push_back(std::move(post));
            tape->argmax.push_back(std::move(pooled.argmax));
        }
        cur = std::move(pooled.y);
    }
    auto gap = global_avg_pool_forward(cur);
    auto hidden_pre = hidden_.forward(gap);
    auto hidden = relu_forward(hidden_pre);
    std::vector<Matrix<T>> logits;
    for (const auto& head : heads_) logits.push_back(head.forward(hidden));
    if (tape) {
        tape->last = std::move(cur);
        tape->pooled = std::move(gap);
        tape->hidden_pre = std::move(hidden_pre);
        tape->hidden = std::move(hidden);
    }
    return logits;
}

template <typename T>
Tensor4<T> Cnn<T>::backward(const Tape& tape, const std::vector<Matrix<T>>& dlogits, Cnn& grad, bool need_dx) const {
    if (dlogits.size() != heads_.size()) throw DataError("cnn backward: one gradient per head is required");
    Matrix<T> dhidden(tape.hidden.rows, tape.hidden.cols);
    for (std::size_t i = 0; i < heads_.size(); ++i) {
        Matrix<T> dh;
        dense_backward<T>(tape.hidden, heads_[i].w, dlogits[i], &dh, grad.heads_[i].w, grad.heads_[i].b);
        for (std::size_t k = 0; k < dh.data.size(); ++k) dhidden.data[k] += dh.data[k];
    }
    const auto dhidden_pre = relu_backward(tape.hidden_pre, dhidden);
    Matrix<T> dgap;
    dense_backward<T>(tape.pooled, hidden_.w, dhidden_pre, &dgap, grad.hidden_.w, grad.hidden_.b);
    auto dcur = global_avg_pool_backward(dgap, tape.last);
    for (std::size_t i = convs_.size(); i-- > 0;) {
        const auto dpost = maxpool2_backward(dcur, tape.argmax[i], tape.post_relu[i]);
        const auto dpre = relu_backward(tape.pre_relu[i], dpost);
        const bool want_dx = need_dx || i > 0;
        Tensor4<T> dx;
        conv2d_backward<T>(tape.inputs[i], convs_[i].w, dpre, convs_[i].geom, want_dx ? &dx : nullptr,
                           grad.convs_[i].w, grad.convs_[i].b);
        dcur = std::move(dx);
    }
    return dcur;
}

template <typename T>
std::vector<std::span<T>> Cnn<T>::tensors() {
    std::vector<std::span<T>> out;
    for (auto& c : convs_) {
        out.emplace_back(c.w);
        out.emplace_back(c.b);
    }
    out.emplace_back(hidden_.w);
    out.emplace_back(hidden_.b);
    for (auto& h : heads_) {
        out.emplace_back(h.w);
        out.emplace_back(h.b);
    }
    return out;
}

template <typename T>
std::vector<std::span<const T>> Cnn<T>::tensors() const {
    std::vector<std::span<const T>> out;
    for (auto t : const_cast<Cnn*>(this)->tensors()) out.emplace_back(t);
    return out;
}

template <typename T>
void Cnn<T>::set_zero() {
    for (auto t : tensors()) std::fill(t.begin(), t.end(), T(0));
}

template <typename T>
template <typename U>
Cnn<U> Cnn<T>::cast() const {
    Cnn<U> out(config_);
    auto dst = out.tensors();
    const auto src = tensors();
    for (std::size_t i = 0; i < dst.size(); ++i) std::copy(src[i].begin(), src[i].end(), dst[i].begin());
    return out;
}

template struct DenseLayer<float>;
template struct DenseLayer<double>;
template class Cnn<float>;
template class Cnn<double>;
template Cnn<double> Cnn<float>::cast<double>() const;
template Cnn<float> Cnn<double>::cast<float>() const;

void write_cnn(std::ostream& out, const Cnn<float>& cnn) {
    out << "SEMI-CNN v1\n" << cnn.config().to_line() << '\n';
    for (const auto t : cnn.tensors()) io::write_f32(out, t);
}

Cnn<float> read_cnn(std::istream& in) {
    if (io::read_line(in) != "SEMI-CNN v1") throw DataError("not a CNN checkpoint");
    Cnn<float> cnn(CnnConfig::from_line(io::read_line(in)));
    for (auto t : cnn.tensors()) io::read_f32(in, t);
    return cnn;
}

}  // namespace semimage::nnet
