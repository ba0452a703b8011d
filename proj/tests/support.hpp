#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "semimage/corpus.hpp"
#include "semimage/embeddings.hpp"
#include "semimage/model.hpp"
#include "semimage/nnet/tensor.hpp"
#include "semimage/rng.hpp"
#include "semimage/train.hpp"

namespace semimage::testing {

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(rng, lo, hi);
    return v;
}

inline nnet::Tensor4<double> random_tensor(Rng& rng, std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    nnet::Tensor4<double> t(n, c, h, w);
    for (auto& x : t.data) x = uniform(rng, -1.0, 1.0);
    return t;
}

inline nnet::Matrix<double> random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    nnet::Matrix<double> m(r, c);
    for (auto& x : m.data) x = uniform(rng, -1.0, 1.0);
    return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// ||a - n|| / max(||a|| + ||n||, floor).
inline double relative_error(std::span<const double> analytic, std::span<const double> numeric,
                             double floor = 1e-7) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
        na += analytic[i] * analytic[i];
        nn += numeric[i] * numeric[i];
    }
    return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nn), floor);
}

/// Central differences of f with respect to every entry of x (x is restored).
inline std::vector<double> numeric_gradient(std::span<double> x, const std::function<double()>& f, double eps = 1e-6) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + eps;
        const double up = f();
        x[i] = keep - eps;
        const double down = f();
        x[i] = keep;
        g[i] = (up - down) / (2.0 * eps);
    }
    return g;
}

/// Same, restricted to the given coordinates.
inline std::vector<double> numeric_gradient_at(std::span<double> x, std::span<const std::size_t> idx,
                                               const std::function<double()>& f, double eps = 1e-6) {
    std::vector<double> g;
    for (const auto i : idx) {
        const double keep = x[i];
        x[i] = keep + eps;
        const double up = f();
        x[i] = keep - eps;
        const double down = f();
        x[i] = keep;
        g.push_back((up - down) / (2.0 * eps));
    }
    return g;
}

/// Up to k distinct coordinates of an n-vector, seeded.
inline std::vector<std::size_t> sample_indices(Rng& rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    shuffle(all.begin(), all.end(), rng);
    all.resize(std::min(n, k));
    return all;
}

/// Fresh scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("semimage_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// A small labeled dataset with random vectors, for gradient and routing tests.
struct TinyData {
    Vocabulary vocab;
    EmbeddingTable table;
    SentenceEncoder encoder;
    std::vector<Document> docs;
    std::vector<Example> examples;
    ModelConfig config;
};

inline TinyData tiny_data(std::uint64_t seed, std::size_t docs = 4, std::size_t num_topics = 3) {
    CorpusSpec spec;
    spec.num_topics = num_topics;
    spec.num_sentiments = 2;
    spec.docs_per_cell = 1;
    spec.min_sentences = 1;
    spec.max_sentences = 4;
    spec.min_words = 3;
    spec.max_words = 8;
    spec.topic_vocab_size = 6;
    spec.sentiment_lexicon_size = 3;
    spec.function_vocab_size = 3;
    spec.embedding_dim = 5;
    spec.seed = seed;
    const auto corpus = generate_synthetic(spec);
    std::vector<RawDocument> raws(corpus.docs.begin(), corpus.docs.begin() + std::min(docs, corpus.docs.size()));

    TinyData t;
    t.vocab = build_vocabulary(corpus.docs);
    const auto topics = build_topic_labels(corpus.docs);
    const auto sentiments = build_sentiment_labels(corpus.docs);
    t.table = EmbeddingTable::from_rows(corpus.vectors, t.vocab);
    GridShape grid{7, 4};
    t.docs = encode_documents(raws, t.vocab, topics, sentiments, grid);
    t.config.embedding_dim = spec.embedding_dim;
    t.config.mapper_hidden = 4;
    t.config.blocks = {3, 4};
    t.config.head_hidden = 5;
    t.config.aux_hidden = 4;
    t.config.num_topics = topics.size();
    t.config.num_sentiments = sentiments.size();
    t.config.grid = grid;
    t.examples = make_examples(t.docs, t.table, t.encoder, t.config);
    return t;
}

/// Initialized model with every bias and weight jittered, so no activation
/// sits exactly on a kink.
inline Model<double> jittered_model(const ModelConfig& cfg, std::uint64_t seed) {
    auto m = Model<float>::init(cfg, seed).cast<double>();
    Rng rng(mix_seed(seed, 77));
    for (auto t : m.tensors()) {
        for (auto& x : t) x += normal(rng) * 0.2;
    }
    return m;
}

/// The seeded 5-topic x 2-sentiment benchmark: 2000 training and 500 test
/// documents, 10% of the training side held out for validation.
struct SyntheticBenchmark {
    SyntheticCorpus corpus;
    std::vector<RawDocument> train_raw;
    std::vector<RawDocument> test_raw;
    ExperimentData data;
    ModelConfig base;
    TrainConfig train;
};

inline SyntheticBenchmark synthetic_benchmark() {
    SyntheticBenchmark b;
    CorpusSpec spec;  // 5 x 2 cells, 250 documents each, mix_noise 0.1, seed 7
    b.corpus = generate_synthetic(spec);
    auto split = stratified_split(b.corpus.docs, 0.2, mix_seed(spec.seed, 99));
    b.train_raw = std::move(split.kept);
    b.test_raw = std::move(split.holdout);
    b.data = build_experiment(b.train_raw, b.test_raw, b.corpus.vectors, SentenceEncoder::mean_pool(),
                              GridShape{16, 8}, 0.1, 1);
    b.base.mapper_hidden = 32;
    b.base.blocks = {16, 32};
    b.base.head_hidden = 32;
    b.base.aux_hidden = 16;
    b.train.lr = 1e-3;
    b.train.max_epochs = 15;
    b.train.early_stop_patience = 3;
    b.train.batch_size = 8;
    b.train.seed = 1;
    return b;
}

}  // namespace semimage::testing
