#include "semimage/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "semimage/error.hpp"
#include "semimage/rng.hpp"

namespace semimage {

std::string to_string(Ablation a) {
    switch (a) {
        case Ablation::full: return "full";
        case Ablation::no_boundary: return "no_boundary";
        case Ablation::no_aux: return "no_aux";
        case Ablation::rgb: return "rgb";
    }
    return "?";
}

Ablation parse_ablation(std::string_view s) {
    if (s == "full") return Ablation::full;
    if (s == "no_boundary") return Ablation::no_boundary;
    if (s == "no_aux") return Ablation::no_aux;
    if (s == "rgb") return Ablation::rgb;
    throw UsageError("unknown ablation '" + std::string(s) + "' (full|no_boundary|no_aux|rgb)");
}

TrainConfig TrainConfig::normalized() const {
    TrainConfig c = *this;
    if (c.ablation == Ablation::no_aux || c.ablation == Ablation::rgb) {
        c.lambda1 = 0.0;
        c.lambda2 = 0.0;
    }
    return c;
}

void TrainConfig::validate() const {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw UsageError("lambda1 and lambda2 must be >= 0");
    if (!(lr > 0.0)) throw UsageError("learning rate must be positive");
    if (max_epochs == 0) throw UsageError("max_epochs must be positive");
    if (batch_size == 0) throw UsageError("batch_size must be positive");
    if (val_fraction <= 0.0 || val_fraction >= 1.0) throw UsageError("val_fraction must be in (0, 1)");
}

LossWeights TrainConfig::loss_weights() const {
    const auto c = normalized();
    return {c.lambda1, c.lambda2, c.detach_main};
}

ModelConfig TrainConfig::apply(ModelConfig base) const {
    base.space = ablation == Ablation::rgb ? PixelSpace::rgb : PixelSpace::hsv;
    base.boundaries = ablation != Ablation::no_boundary;
    base.aux_pool = aux_pool;
    base.main_task = main_task;
    return base;
}

double total_loss(double l_main, double l_topic, double l_sent, double lambda1, double lambda2) {
    return l_main + lambda1 * l_topic + lambda2 * l_sent;
}

namespace {

struct LossAccumulator {
    LossBreakdown sum;
    std::size_t n = 0;

    void add(const LossBreakdown& l, std::size_t weight) {
        const auto w = static_cast<double>(weight);
        sum.main += l.main * w;
        sum.topic += l.topic * w;
        sum.sentiment += l.sentiment * w;
        sum.total += l.total * w;
        n += weight;
    }
    LossBreakdown mean() const {
        if (n == 0) return {};
        const auto d = static_cast<double>(n);
        return {sum.main / d, sum.topic / d, sum.sentiment / d, sum.total / d};
    }
};

// (pred, gold) pairs over documents carrying the label.
struct Labeled {
    std::vector<std::size_t> pred;
    std::vector<std::size_t> gold;
};

Labeled labeled(const std::vector<Example>& data, const std::vector<std::optional<std::size_t>>& pred, bool topic) {
    Labeled out;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& g = topic ? data[i].topic : data[i].sentiment;
        if (!g || !pred[i]) continue;
        out.pred.push_back(*pred[i]);
        out.gold.push_back(static_cast<std::size_t>(*g));
    }
    return out;
}

}  // namespace

Inference infer(const Model<float>& model, const std::vector<Example>& data, const EmbeddingTable& table,
                const LossWeights& weights, std::size_t batch_size) {
    Inference out;
    LossAccumulator acc;
    std::vector<const Example*> ptrs;
    for (const auto& ex : data) ptrs.push_back(&ex);
    for (std::size_t start = 0; start < ptrs.size(); start += batch_size) {
        const auto end = std::min(ptrs.size(), start + batch_size);
        const std::span<const Example* const> batch(ptrs.data() + start, end - start);
        auto r = forward_backward<float>(model, batch, table, weights, nullptr);
        acc.add(r.loss, batch.size());
        out.topic_pred.insert(out.topic_pred.end(), r.topic_pred.begin(), r.topic_pred.end());
        out.sentiment_pred.insert(out.sentiment_pred.end(), r.sentiment_pred.begin(), r.sentiment_pred.end());
        out.pooled.insert(out.pooled.end(), r.pooled.begin(), r.pooled.end());
    }
    out.loss = acc.mean();
    return out;
}

Metrics evaluate(const Model<float>& model, const std::vector<Example>& data, const EmbeddingTable& table,
                 const LossWeights& weights, std::size_t batch_size) {
    if (data.empty()) throw DataError("evaluate: empty dataset");
    const auto inf = infer(model, data, table, weights, batch_size);
    Metrics m;
    m.loss_total = inf.loss.total;
    const auto& cfg = model.config;
    if (cfg.has_topic_head()) {
        const auto t = labeled(data, inf.topic_pred, true);
        if (!t.gold.empty()) m.topic = compute_task_metrics(t.pred, t.gold, cfg.num_topics);
    }
    if (cfg.has_sentiment_head()) {
        const auto s = labeled(data, inf.sentiment_pred, false);
        if (!s.gold.empty()) m.sentiment = compute_task_metrics(s.pred, s.gold, cfg.num_sentiments);
    }
    if (m.topic && m.sentiment) {
        std::vector<std::size_t> pt, gt, ps, gs;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (!data[i].topic || !data[i].sentiment) continue;
            pt.push_back(*inf.topic_pred[i]);
            gt.push_back(static_cast<std::size_t>(*data[i].topic));
            ps.push_back(*inf.sentiment_pred[i]);
            gs.push_back(static_cast<std::size_t>(*data[i].sentiment));
        }
        if (!pt.empty()) m.exact_match = exact_match(pt, gt, ps, gs);
    }
    return m;
}

LossBreakdown train_epoch(Model<float>& model, nnet::AdamState<float>& adam, const std::vector<Example>& train,
                          const std::vector<std::size_t>& order, const EmbeddingTable& table,
                          const TrainConfig& config, std::size_t epoch) {
    const auto weights = config.loss_weights();
    Model<float> grad(model.config);
    const auto params = model.tensors();
    std::vector<std::span<const float>> grads;
    for (auto t : grad.tensors()) grads.emplace_back(t);

    LossAccumulator acc;
    std::vector<const Example*> batch;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
        batch.clear();
        for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
            batch.push_back(&train[order[i]]);
        grad.set_zero();
        const auto r = forward_backward<float>(model, batch, table, weights, &grad);
        if (!std::isfinite(r.loss.total))
            throw DataError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index));
        nnet::adam_step<float>(params, grads, adam);
        acc.add(r.loss, batch.size());
    }
    return acc.mean();
}

TrainResult train_model(const TrainConfig& config_in, const ModelConfig& model_config,
                        const std::vector<Example>& train, const std::vector<Example>& val,
                        const EmbeddingTable& table, const EpochCallback& on_epoch) {
    const auto config = config_in.normalized();
    config.validate();
    if (train.empty()) throw DataError("training split is empty");
    if (val.empty()) throw DataError("validation split is empty");

    auto model = Model<float>::init(model_config, config.seed);
    nnet::AdamState<float> adam({config.lr, 0.9, 0.999, 1e-8}, model.tensors());

    TrainResult result;
    result.model = model;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    std::vector<std::size_t> order(train.size());
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(mix_seed(config.seed, 1000 + epoch));
        shuffle(order.begin(), order.end(), rng);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train = train_epoch(model, adam, train, order, table, config, epoch);
        const auto inf_weights = config.loss_weights();
        rec.val_metrics = evaluate(model, val, table, inf_weights);
        rec.val = infer(model, val, table, inf_weights).loss;
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (rec.val.total < result.best_val_loss) {
            result.best_val_loss = rec.val.total;
            result.best_epoch = epoch;
            result.model = model;
            since_best = 0;
        } else if (++since_best >= config.early_stop_patience && config.early_stop_patience > 0) {
            break;
        }
    }
    return result;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "epoch,l_main,l_topic,l_sent,l_total,val_l_main,val_l_topic,val_l_sent,val_l_total,"
           "val_topic_acc,val_sentiment_acc,val_topic_macro_f1,val_sentiment_macro_f1,val_exact_match\n";
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return std::string(buf);
    };
    auto opt = [&](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
    for (const auto& r : history) {
        const auto& m = r.val_metrics;
        out << r.epoch << ',' << num(r.train.main) << ',' << num(r.train.topic) << ',' << num(r.train.sentiment) << ','
            << num(r.train.total) << ',' << num(r.val.main) << ',' << num(r.val.topic) << ','
            << num(r.val.sentiment) << ',' << num(r.val.total) << ','
            << opt(m.topic ? std::optional(m.topic->accuracy) : std::nullopt) << ','
            << opt(m.sentiment ? std::optional(m.sentiment->accuracy) : std::nullopt) << ','
            << opt(m.topic ? std::optional(m.topic->macro_f1) : std::nullopt) << ','
            << opt(m.sentiment ? std::optional(m.sentiment->macro_f1) : std::nullopt) << ','
            << opt(m.exact_match) << '\n';
    }
}

// --- experiments -------------------------------------------------------------------------------

ExperimentData build_experiment(const std::vector<RawDocument>& train_raw, const std::vector<RawDocument>& test_raw,
                                const std::vector<std::pair<std::string, std::vector<float>>>& vectors,
                                SentenceEncoder encoder, const GridShape& grid, double val_fraction,
                                std::uint64_t split_seed) {
    if (train_raw.empty()) throw DataError("training corpus is empty");
    ExperimentData data;
    data.grid = grid;
    data.vocab = build_vocabulary(train_raw);
    data.topics = build_topic_labels(train_raw);
    data.sentiments = build_sentiment_labels(train_raw);
    data.table = EmbeddingTable::from_rows(vectors, data.vocab);
    data.encoder = std::move(encoder);
    const auto split = stratified_split(train_raw, val_fraction, split_seed);
    data.train = encode_documents(split.kept, data.vocab, data.topics, data.sentiments, grid);
    data.val = encode_documents(split.holdout, data.vocab, data.topics, data.sentiments, grid);
    data.test = encode_documents(test_raw, data.vocab, data.topics, data.sentiments, grid);
    return data;
}

ExperimentData load_experiment(const DataSources& src, const GridShape& grid, double val_fraction,
                               std::uint64_t split_seed) {
    const auto train_raw = read_jsonl(src.train);
    const auto test_raw = src.test.empty() ? std::vector<RawDocument>{} : read_jsonl(src.test);
    if (train_raw.empty()) throw DataError(src.train.string() + ": corpus is empty");
    ExperimentData data;
    data.grid = grid;
    data.vocab = build_vocabulary(train_raw);
    data.topics = build_topic_labels(train_raw);
    data.sentiments = build_sentiment_labels(train_raw);
    data.table = EmbeddingTable::load(src.vectors, data.vocab);
    data.encoder = src.sentence_vectors.empty() ? SentenceEncoder::mean_pool()
                                                : SentenceEncoder::load_precomputed(src.sentence_vectors);
    const auto split = stratified_split(train_raw, val_fraction, split_seed);
    data.train = encode_documents(split.kept, data.vocab, data.topics, data.sentiments, grid);
    data.val = encode_documents(split.holdout, data.vocab, data.topics, data.sentiments, grid);
    data.test = encode_documents(test_raw, data.vocab, data.topics, data.sentiments, grid);
    return data;
}

ModelConfig model_config_for(const ExperimentData& data, ModelConfig base, const TrainConfig& config) {
    base = config.apply(std::move(base));
    base.embedding_dim = data.table.dim();
    base.num_topics = std::max<std::size_t>(data.topics.size(), 2);
    base.num_sentiments = std::max<std::size_t>(data.sentiments.size(), 2);
    base.grid = data.grid;
    return base;
}

RunResult run_experiment(const ExperimentData& data, const TrainConfig& config, const ModelConfig& base,
                         const EpochCallback& on_epoch) {
    const auto mc = model_config_for(data, base, config);
    const auto train = make_examples(data.train, data.table, data.encoder, mc);
    const auto val = make_examples(data.val, data.table, data.encoder, mc);
    RunResult r;
    r.train = train_model(config, mc, train, val, data.table, on_epoch);
    if (!data.test.empty()) {
        r.test_examples = make_examples(data.test, data.table, data.encoder, mc);
        r.test = evaluate(r.train.model, r.test_examples, data.table, config.loss_weights());
    }
    return r;
}

const AblationRow& AblationReport::row(Ablation a) const {
    for (const auto& r : rows) {
        if (r.ablation == a) return r;
    }
    throw UsageError("ablation report has no row for " + to_string(a));
}

std::string AblationReport::to_markdown() const {
    auto label = [](Ablation a) {
        switch (a) {
            case Ablation::full: return "SemImage (full)";
            case Ablation::no_boundary: return "SemImage w/o Boundary";
            case Ablation::no_aux: return "SemImage w/o Aux";
            case Ablation::rgb: return "RGB-Image Model";
        }
        return "?";
    };
    auto mean = [](const std::vector<double>& v) {
        return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    std::ostringstream s;
    s << "| Model | Exact match (%) | Topic acc (%) | Sentiment acc (%) | Per-seed exact match (%) |\n";
    s << "|---|---|---|---|---|\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "| %s | %.2f ± %.2f | %.2f | %.2f | ", label(r.ablation), 100.0 * r.mean_exact,
                      100.0 * r.sd_exact, 100.0 * mean(r.topic_accuracy), 100.0 * mean(r.sentiment_accuracy));
        s << buf;
        for (std::size_t i = 0; i < r.exact_match.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s%.2f", i ? ", " : "", 100.0 * r.exact_match[i]);
            s << buf;
        }
        s << " |\n";
    }
    s << "\nSeeds:";
    for (const auto seed : seeds) s << ' ' << seed;
    s << '\n';
    return s.str();
}

AblationReport run_ablation_suite(const ExperimentData& data, const TrainConfig& config, const ModelConfig& base,
                                  const std::vector<std::uint64_t>& seeds,
                                  const std::function<void(Ablation, std::uint64_t, const RunResult&)>& on_run) {
    if (config.main_task != MainTask::joint) throw UsageError("the ablation suite needs main_task = joint");
    if (seeds.empty()) throw UsageError("the ablation suite needs at least one seed");
    if (data.test.empty()) throw DataError("the ablation suite needs a test split");
    AblationReport report;
    report.seeds = seeds;
    for (const auto a : {Ablation::full, Ablation::no_boundary, Ablation::no_aux, Ablation::rgb}) {
        AblationRow row;
        row.ablation = a;
        for (const auto seed : seeds) {
            auto cfg = config;
            cfg.ablation = a;
            cfg.seed = seed;
            const auto run = run_experiment(data, cfg, base);
            row.exact_match.push_back(*run.test.exact_match);
            row.topic_accuracy.push_back(run.test.topic->accuracy);
            row.sentiment_accuracy.push_back(run.test.sentiment->accuracy);
            if (on_run) on_run(a, seed, run);
        }
        const auto n = static_cast<double>(row.exact_match.size());
        row.mean_exact = std::accumulate(row.exact_match.begin(), row.exact_match.end(), 0.0) / n;
        double ss = 0.0;
        for (const auto v : row.exact_match) ss += (v - row.mean_exact) * (v - row.mean_exact);
        row.sd_exact = row.exact_match.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace semimage
