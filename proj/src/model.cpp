#include "semimage/model.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "semimage/binary_io.hpp"
#include "semimage/error.hpp"
#include "semimage/rng.hpp"

namespace semimage {
namespace {

using nnet::Matrix;
using nnet::Tensor4;
using Index = std::ptrdiff_t;

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

// Pooled hue/saturation of one document, with what backward needs.
template <typename T>
struct Pooled {
    T hbar_cos = 0;
    T hbar_sin = 0;
    T s = 0;
    std::size_t count = 0;
    std::size_t argmax = 0;  // word index holding the max saturation
};

}  // namespace

std::string to_string(MainTask t) {
    switch (t) {
        case MainTask::topic: return "topic";
        case MainTask::sentiment: return "sentiment";
        case MainTask::joint: return "joint";
    }
    return "?";
}

std::string to_string(AuxPool p) { return p == AuxPool::mean ? "mean" : "max"; }
std::string to_string(PixelSpace s) { return s == PixelSpace::hsv ? "hsv" : "rgb"; }

MainTask parse_main_task(std::string_view s) {
    if (s == "topic") return MainTask::topic;
    if (s == "sentiment") return MainTask::sentiment;
    if (s == "joint") return MainTask::joint;
    throw UsageError("unknown main task '" + std::string(s) + "' (topic|sentiment|joint)");
}

AuxPool parse_aux_pool(std::string_view s) {
    if (s == "mean") return AuxPool::mean;
    if (s == "max") return AuxPool::max;
    throw UsageError("unknown aux_pool '" + std::string(s) + "' (mean|max)");
}

PixelSpace parse_pixel_space(std::string_view s) {
    if (s == "hsv") return PixelSpace::hsv;
    if (s == "rgb") return PixelSpace::rgb;
    throw UsageError("unknown pixel space '" + std::string(s) + "' (hsv|rgb)");
}

nnet::CnnConfig ModelConfig::cnn_config() const {
    nnet::CnnConfig c;
    c.input_channels = channel_count(space);
    c.blocks = blocks;
    c.kernel = kernel;
    c.head_hidden = head_hidden;
    c.num_classes.clear();
    if (has_topic_head()) c.num_classes.push_back(num_topics);
    if (has_sentiment_head()) c.num_classes.push_back(num_sentiments);
    return c;
}

std::string ModelConfig::to_line() const {
    std::ostringstream s;
    s << "space=" << to_string(space) << " boundaries=" << (boundaries ? 1 : 0) << " d=" << embedding_dim
      << " mapper_hidden=" << mapper_hidden << " blocks=" << join(blocks) << " kernel=" << kernel
      << " head_hidden=" << head_hidden << " aux_hidden=" << aux_hidden << " topics=" << num_topics
      << " sentiments=" << num_sentiments << " main=" << to_string(main_task) << " aux_pool=" << to_string(aux_pool)
      << " L=" << grid.sentence_len << " nmax=" << grid.max_sentences;
    return s.str();
}

ModelConfig ModelConfig::from_line(const std::string& line) {
    const auto h = io::HeaderLine::parse(line);
    ModelConfig c;
    c.space = parse_pixel_space(h.at("space"));
    c.boundaries = h.at("boundaries") == "1";
    c.embedding_dim = h.count("d");
    c.mapper_hidden = h.count("mapper_hidden");
    c.blocks = split_counts(h.at("blocks"));
    c.kernel = h.count("kernel");
    c.head_hidden = h.count("head_hidden");
    c.aux_hidden = h.count("aux_hidden");
    c.num_topics = h.count("topics");
    c.num_sentiments = h.count("sentiments");
    c.main_task = parse_main_task(h.at("main"));
    c.aux_pool = parse_aux_pool(h.at("aux_pool"));
    c.grid.sentence_len = h.count("L");
    c.grid.max_sentences = h.count("nmax");
    return c;
}

// --- Model -----------------------------------------------------------------------------

template <typename T>
Model<T>::Model(const ModelConfig& cfg)
    : config(cfg),
      mapper(MapperParams<T>::zeros(cfg.space, cfg.embedding_dim, cfg.mapper_hidden)),
      cnn(cfg.cnn_config()),
      aux(cfg.aux_hidden, std::max<std::size_t>(cfg.num_topics, 2), std::max<std::size_t>(cfg.num_sentiments, 2)) {}

template <typename T>
Model<T> Model<T>::init(const ModelConfig& cfg, std::uint64_t seed) {
    Model m(cfg);
    m.mapper = cm_init<T>(cfg.embedding_dim, cfg.mapper_hidden, mix_seed(seed, 0), cfg.space);
    m.cnn = nnet::Cnn<T>::init(cfg.cnn_config(), mix_seed(seed, 1));
    m.aux.topic_hidden.init(mix_seed(seed, 2));
    m.aux.topic_out.init(mix_seed(seed, 3));
    m.aux.sentiment_out.init(mix_seed(seed, 4));
    return m;
}

template <typename T>
std::vector<std::span<T>> Model<T>::tensors() {
    std::vector<std::span<T>> out;
    for (auto t : mapper.tensors()) out.push_back(t);
    for (auto t : cnn.tensors()) out.push_back(t);
    for (auto t : aux.tensors()) out.push_back(t);
    return out;
}

template <typename T>
std::vector<std::span<const T>> Model<T>::tensors() const {
    std::vector<std::span<const T>> out;
    for (auto t : const_cast<Model*>(this)->tensors()) out.emplace_back(t);
    return out;
}

template <typename T>
void Model<T>::set_zero() {
    for (auto t : tensors()) std::fill(t.begin(), t.end(), T(0));
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
    Model<U> out(config);
    auto dst = out.tensors();
    const auto src = tensors();
    for (std::size_t i = 0; i < dst.size(); ++i) std::copy(src[i].begin(), src[i].end(), dst[i].begin());
    return out;
}

template class Model<float>;
template class Model<double>;
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;

Example make_example(const Document& doc, const EmbeddingTable& table, const SentenceEncoder& encoder,
                     const ModelConfig& cfg) {
    if (doc.sentences.size() > cfg.grid.max_sentences)
        throw DataError("document '" + doc.doc_id + "' exceeds the sentence cap");
    Example ex;
    ex.doc_id = doc.doc_id;
    ex.plan = plan_image(doc, table, encoder, cfg.boundaries);
    if (ex.plan.width != cfg.grid.sentence_len)
        throw DataError("document '" + doc.doc_id + "' has sentence rows of length " + std::to_string(ex.plan.width) +
                        ", model expects " + std::to_string(cfg.grid.sentence_len));
    ex.topic = doc.topic;
    ex.sentiment = doc.sentiment;
    return ex;
}

std::vector<Example> make_examples(const std::vector<Document>& docs, const EmbeddingTable& table,
                                   const SentenceEncoder& encoder, const ModelConfig& cfg) {
    std::vector<Example> out(docs.size());
    std::vector<std::string> errors(docs.size());
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < static_cast<Index>(docs.size()); ++i) {
        try {
            out[i] = make_example(docs[i], table, encoder, cfg);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) throw DataError(e);
    }
    return out;
}

// --- forward / backward --------------------------------------------------------------------

template <typename T>
BatchResult forward_backward(const Model<T>& model, std::span<const Example* const> batch,
                             const EmbeddingTable& table, const LossWeights& weights, Model<T>* grad) {
    const auto& cfg = model.config;
    const std::size_t B = batch.size();
    if (B == 0) throw DataError("empty batch");
    const std::size_t C = channel_count(cfg.space);
    const std::size_t H = cfg.image_height();
    const std::size_t W = cfg.grid.sentence_len;
    const bool hsv = cfg.space == PixelSpace::hsv;
    const bool train = grad != nullptr;

    for (const auto* ex : batch) {
        if (ex->plan.height > H || ex->plan.width != W)
            throw DataError("document '" + ex->doc_id + "' does not fit the model's image geometry");
        if (cfg.has_topic_head() && !ex->topic)
            throw DataError("document '" + ex->doc_id + "' lacks the topic label required by the main task");
        if (cfg.has_sentiment_head() && !ex->sentiment)
            throw DataError("document '" + ex->doc_id + "' lacks the sentiment label required by the main task");
    }

    // 1. Images (bottom rows stay zero) and pooled features.
    Tensor4<T> x(B, C, H, W);
    std::vector<std::vector<MapperCache<T>>> caches(train ? B : 0);
    std::vector<Pooled<T>> pooled(B);
#pragma omp parallel for schedule(static)
    for (Index b = 0; b < static_cast<Index>(B); ++b) {
        const auto& plan = batch[b]->plan;
        for (const auto& br : plan.boundaries) {
            const auto v = static_cast<T>(br.intensity);
            for (std::size_t c = 0; c < W; ++c) {
                if (hsv) {
                    x(b, channel::val, br.row, c) = v;
                } else {
                    for (std::size_t ch = 0; ch < 3; ++ch) x(b, ch, br.row, c) = v;
                }
            }
        }
        if (train) caches[b].resize(plan.words.size());
        auto& pf = pooled[b];
        for (std::size_t k = 0; k < plan.words.size(); ++k) {
            const auto& cell = plan.words[k];
            const auto px = cm_forward(model.mapper, table.lookup(cell.token), train ? &caches[b][k] : nullptr);
            for (std::size_t ch = 0; ch < C; ++ch) x(b, ch, cell.row, cell.col) = px[ch];
            if (!hsv) continue;
            pf.hbar_cos += px[channel::h_cos];
            pf.hbar_sin += px[channel::h_sin];
            if (cfg.aux_pool == AuxPool::mean) {
                pf.s += px[channel::sat];
            } else if (k == 0 || px[channel::sat] > pf.s) {
                pf.s = px[channel::sat];
                pf.argmax = k;
            }
        }
        pf.count = plan.words.size();
        if (pf.count > 0) {
            const T n = static_cast<T>(pf.count);
            pf.hbar_cos /= n;
            pf.hbar_sin /= n;
            if (cfg.aux_pool == AuxPool::mean) pf.s /= n;
        }
    }

    BatchResult result;
    result.topic_pred.assign(B, std::nullopt);
    result.sentiment_pred.assign(B, std::nullopt);

    // 2. Main task through the CNN.
    typename nnet::Cnn<T>::Tape tape;
    const auto logits = model.cnn.forward(x, train ? &tape : nullptr);
    std::vector<Matrix<T>> dlogits;
    std::size_t head = 0;
    auto main_head = [&](auto label_of, auto& preds) {
        const auto& lg = logits[head];
        Matrix<T> d(B, lg.cols);
        double loss = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            const auto r = nnet::softmax_xent<T>(lg.row(b), static_cast<std::size_t>(label_of(*batch[b])));
            loss += static_cast<double>(r.loss);
            for (std::size_t k = 0; k < lg.cols; ++k) d(b, k) = r.grad[k] / static_cast<T>(B);
            preds[b] = nnet::argmax(lg.row(b));
        }
        dlogits.push_back(std::move(d));
        ++head;
        return loss / static_cast<double>(B);
    };
    if (cfg.has_topic_head()) result.loss.main += main_head([](const Example& e) { return *e.topic; }, result.topic_pred);
    if (cfg.has_sentiment_head())
        result.loss.main += main_head([](const Example& e) { return *e.sentiment; }, result.sentiment_pred);

    // 3. Auxiliary heads on pooled features.
    Matrix<T> topic_in(B, 2);
    Matrix<T> sent_in(B, 1);
    Matrix<T> d_topic_in(B, 2);
    Matrix<T> d_sent_in(B, 1);
    if (hsv) {
        for (std::size_t b = 0; b < B; ++b) {
            topic_in(b, 0) = pooled[b].hbar_cos;
            topic_in(b, 1) = pooled[b].hbar_sin;
            sent_in(b, 0) = pooled[b].s;
            result.pooled.push_back({static_cast<double>(pooled[b].hbar_cos), static_cast<double>(pooled[b].hbar_sin),
                                     static_cast<double>(pooled[b].s)});
        }
        const auto th_pre = model.aux.topic_hidden.forward(topic_in);
        const auto th = nnet::relu_forward(th_pre);
        const auto t_logits = model.aux.topic_out.forward(th);
        const auto s_logits = model.aux.sentiment_out.forward(sent_in);

        auto aux_loss = [&](const Matrix<T>& lg, auto label_of, double lambda, Matrix<T>& d) {
            std::size_t labeled = 0;
            for (const auto* ex : batch) labeled += label_of(*ex).has_value() ? 1 : 0;
            double loss = 0.0;
            for (std::size_t b = 0; b < B; ++b) {
                const auto label = label_of(*batch[b]);
                if (!label) continue;
                const auto r = nnet::softmax_xent<T>(lg.row(b), static_cast<std::size_t>(*label));
                loss += static_cast<double>(r.loss);
                for (std::size_t k = 0; k < lg.cols; ++k)
                    d(b, k) = static_cast<T>(lambda) * r.grad[k] / static_cast<T>(labeled);
            }
            return labeled ? loss / static_cast<double>(labeled) : 0.0;
        };
        Matrix<T> d_tlogits(B, t_logits.cols);
        Matrix<T> d_slogits(B, s_logits.cols);
        result.loss.topic = aux_loss(t_logits, [](const Example& e) { return e.topic; }, weights.lambda1, d_tlogits);
        result.loss.sentiment =
            aux_loss(s_logits, [](const Example& e) { return e.sentiment; }, weights.lambda2, d_slogits);

        if (train && weights.lambda1 > 0.0) {
            Matrix<T> d_th;
            nnet::dense_backward<T>(th, model.aux.topic_out.w, d_tlogits, &d_th, grad->aux.topic_out.w,
                                    grad->aux.topic_out.b);
            const auto d_th_pre = nnet::relu_backward(th_pre, d_th);
            nnet::dense_backward<T>(topic_in, model.aux.topic_hidden.w, d_th_pre, &d_topic_in,
                                    grad->aux.topic_hidden.w, grad->aux.topic_hidden.b);
        }
        if (train && weights.lambda2 > 0.0) {
            nnet::dense_backward<T>(sent_in, model.aux.sentiment_out.w, d_slogits, &d_sent_in,
                                    grad->aux.sentiment_out.w, grad->aux.sentiment_out.b);
        }
    }
    result.loss.total = result.loss.main + weights.lambda1 * result.loss.topic + weights.lambda2 * result.loss.sentiment;
    if (!train) return result;

    // 4. Backward into the CNN and the mapper.
    Tensor4<T> dx;
    if (!weights.detach_main) {
        dx = model.cnn.backward(tape, dlogits, grad->cnn, true);
    } else {
        dx = Tensor4<T>(B, C, H, W);
    }
    std::vector<MapperParams<T>> doc_grads(B, MapperParams<T>::zeros(cfg.space, model.mapper.d, model.mapper.h));
#pragma omp parallel for schedule(static)
    for (Index b = 0; b < static_cast<Index>(B); ++b) {
        const auto& plan = batch[b]->plan;
        const auto& pf = pooled[b];
        const T inv = pf.count ? T(1) / static_cast<T>(pf.count) : T(0);
        for (std::size_t k = 0; k < plan.words.size(); ++k) {
            const auto& cell = plan.words[k];
            std::array<T, 4> g{};
            for (std::size_t ch = 0; ch < C; ++ch) g[ch] = dx(b, ch, cell.row, cell.col);
            if (hsv) {
                g[channel::h_cos] += d_topic_in(b, 0) * inv;
                g[channel::h_sin] += d_topic_in(b, 1) * inv;
                if (cfg.aux_pool == AuxPool::mean) {
                    g[channel::sat] += d_sent_in(b, 0) * inv;
                } else if (k == pf.argmax) {
                    g[channel::sat] += d_sent_in(b, 0);
                }
            }
            cm_backward_into(model.mapper, caches[b][k], std::span<const T>(g), doc_grads[b]);
        }
    }
    for (const auto& g : doc_grads) grad->mapper += g;
    return result;
}

template BatchResult forward_backward(const Model<float>&, std::span<const Example* const>, const EmbeddingTable&,
                                      const LossWeights&, Model<float>*);
template BatchResult forward_backward(const Model<double>&, std::span<const Example* const>, const EmbeddingTable&,
                                      const LossWeights&, Model<double>*);

// --- checkpoints ------------------------------------------------------------------------------

void write_model(std::ostream& out, const Model<float>& model) {
    out << "SEMI-MODEL v1\n" << model.config.to_line() << '\n';
    write_mapper(out, model.mapper);
    nnet::write_cnn(out, model.cnn);
    out << "SEMI-AUX v1\n";
    for (const auto t : const_cast<Model<float>&>(model).aux.tensors()) io::write_f32(out, std::span<const float>(t));
}

Model<float> read_model(std::istream& in) {
    if (io::read_line(in) != "SEMI-MODEL v1") throw DataError("not a model checkpoint");
    Model<float> model(ModelConfig::from_line(io::read_line(in)));
    auto mapper = read_mapper(in);
    if (mapper.space != model.mapper.space || mapper.d != model.mapper.d || mapper.h != model.mapper.h)
        throw DataError("model checkpoint: mapper does not match the model config");
    model.mapper = std::move(mapper);
    auto cnn = nnet::read_cnn(in);
    if (!(cnn.config() == model.cnn.config())) throw DataError("model checkpoint: CNN does not match the model config");
    model.cnn = std::move(cnn);
    if (io::read_line(in) != "SEMI-AUX v1") throw DataError("model checkpoint: missing aux section");
    for (auto t : model.aux.tensors()) io::read_f32(in, t);
    return model;
}

void save_model(const std::filesystem::path& path, const Model<float>& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    write_model(out, model);
}

Model<float> load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    return read_model(in);
}

}  // namespace semimage
