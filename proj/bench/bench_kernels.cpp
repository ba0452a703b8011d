// OpenMP kernels vs the serial reference, plus one full training step.
// Thread count comes from SEMIMAGE_THREADS (default 1).

#include <benchmark/benchmark.h>

#include <vector>

#include "semimage/model.hpp"
#include "semimage/nnet/kernels.hpp"
#include "semimage/nnet/reference.hpp"
#include "semimage/rng.hpp"
#include "semimage/threads.hpp"

using namespace semimage;
using namespace semimage::nnet;

namespace {

struct ConvCase {
    ConvGeometry g;
    Tensor4<float> x;
    std::vector<float> w;
    std::vector<float> b;
    Tensor4<float> dy;
};

// batch x 4 x (2*8-1) x 16, like a benchmark-sized image batch
ConvCase make_case(std::size_t batch, std::size_t in_c, std::size_t out_c) {
    ConvCase c;
    c.g = ConvGeometry{in_c, out_c, 3, 1, 1};
    c.x = Tensor4<float>(batch, in_c, 15, 16);
    Rng rng(1);
    for (auto& v : c.x.data) v = static_cast<float>(uniform(rng, -1.0, 1.0));
    c.w.resize(c.g.weight_count());
    for (auto& v : c.w) v = static_cast<float>(uniform(rng, -0.3, 0.3));
    c.b.assign(out_c, 0.1f);
    c.dy = Tensor4<float>(batch, out_c, 15, 16);
    for (auto& v : c.dy.data) v = static_cast<float>(uniform(rng, -1.0, 1.0));
    return c;
}

void BM_ConvForward(benchmark::State& state) {
    const auto c = make_case(state.range(0), 4, 16);
    for (auto _ : state) benchmark::DoNotOptimize(conv2d_forward<float>(c.x, c.w, c.b, c.g));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ConvForwardReference(benchmark::State& state) {
    const auto c = make_case(state.range(0), 4, 16);
    for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d_forward<float>(c.x, c.w, c.b, c.g));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ConvBackward(benchmark::State& state) {
    const auto c = make_case(state.range(0), 4, 16);
    std::vector<float> dw(c.w.size()), db(c.b.size());
    Tensor4<float> dx;
    for (auto _ : state) {
        conv2d_backward<float>(c.x, c.w, c.dy, c.g, &dx, dw, db);
        benchmark::DoNotOptimize(dx.data.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ConvBackwardReference(benchmark::State& state) {
    const auto c = make_case(state.range(0), 4, 16);
    std::vector<float> dw(c.w.size()), db(c.b.size());
    Tensor4<float> dx;
    for (auto _ : state) {
        reference::conv2d_backward<float>(c.x, c.w, c.dy, c.g, &dx, dw, db);
        benchmark::DoNotOptimize(dx.data.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_TrainStep(benchmark::State& state) {
    CorpusSpec spec;
    spec.docs_per_cell = 4;
    const auto corpus = generate_synthetic(spec);
    const auto vocab = build_vocabulary(corpus.docs);
    const auto topics = build_topic_labels(corpus.docs);
    const auto sentiments = build_sentiment_labels(corpus.docs);
    const auto table = EmbeddingTable::from_rows(corpus.vectors, vocab);
    ModelConfig cfg;
    cfg.embedding_dim = spec.embedding_dim;
    cfg.mapper_hidden = 32;
    cfg.num_topics = topics.size();
    cfg.num_sentiments = sentiments.size();
    cfg.grid = {16, 8};
    const auto docs = encode_documents(corpus.docs, vocab, topics, sentiments, cfg.grid);
    const auto examples = make_examples(docs, table, SentenceEncoder::mean_pool(), cfg);
    std::vector<const Example*> batch;
    for (std::size_t i = 0; i < static_cast<std::size_t>(state.range(0)); ++i) batch.push_back(&examples[i]);
    const auto model = Model<float>::init(cfg, 1);
    Model<float> grad(cfg);
    for (auto _ : state) {
        grad.set_zero();
        benchmark::DoNotOptimize(forward_backward<float>(model, batch, table, LossWeights{}, &grad));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_ConvForward)->Arg(8)->Arg(32);
BENCHMARK(BM_ConvForwardReference)->Arg(8)->Arg(32);
BENCHMARK(BM_ConvBackward)->Arg(8)->Arg(32);
BENCHMARK(BM_ConvBackwardReference)->Arg(8)->Arg(32);
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(32);

int main(int argc, char** argv) {
    configure_threads();
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    benchmark::AddCustomContext("threads", std::to_string(thread_count()));
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
