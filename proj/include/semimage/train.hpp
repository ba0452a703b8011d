#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "semimage/corpus.hpp"
#include "semimage/embeddings.hpp"
#include "semimage/metrics.hpp"
#include "semimage/model.hpp"
#include "semimage/nnet/adam.hpp"

namespace semimage {

enum class Ablation { full, no_boundary, no_aux, rgb };

std::string to_string(Ablation a);
Ablation parse_ablation(std::string_view s);

struct TrainConfig {
    double lambda1 = 0.5;
    double lambda2 = 0.5;
    double lr = 2e-4;
    std::size_t max_epochs = 10;
    std::size_t early_stop_patience = 3;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    Ablation ablation = Ablation::full;
    AuxPool aux_pool = AuxPool::mean;
    MainTask main_task = MainTask::joint;
    double val_fraction = 0.1;
    bool detach_main = false;  // debug only

    /// no_aux and rgb force lambda1 = lambda2 = 0.
    TrainConfig normalized() const;
    void validate() const;
    LossWeights loss_weights() const;
    /// Copies ablation, aux_pool and main_task into a model config.
    ModelConfig apply(ModelConfig base) const;
};

/// l_main + lambda1 * l_topic + lambda2 * l_sent.
double total_loss(double l_main, double l_topic, double l_sent, double lambda1, double lambda2);

struct EpochRecord {
    std::size_t epoch = 0;
    LossBreakdown train;
    LossBreakdown val;
    Metrics val_metrics;
};

struct TrainResult {
    Model<float> model;  // best-validation parameters
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
};

/// Per-document outputs of a forward pass over a dataset.
struct Inference {
    std::vector<std::optional<std::size_t>> topic_pred;
    std::vector<std::optional<std::size_t>> sentiment_pred;
    std::vector<PooledFeatures> pooled;
    LossBreakdown loss;  // example-weighted means
};

Inference infer(const Model<float>& model, const std::vector<Example>& data, const EmbeddingTable& table,
                const LossWeights& weights, std::size_t batch_size = 64);

Metrics evaluate(const Model<float>& model, const std::vector<Example>& data, const EmbeddingTable& table,
                 const LossWeights& weights = {}, std::size_t batch_size = 64);

/// One pass over train in the given order; Adam updates after every batch.
LossBreakdown train_epoch(Model<float>& model, nnet::AdamState<float>& adam, const std::vector<Example>& train,
                          const std::vector<std::size_t>& order, const EmbeddingTable& table,
                          const TrainConfig& config, std::size_t epoch);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains from a seeded initialization with early stopping on validation
/// total loss; returns the best-validation parameters.
TrainResult train_model(const TrainConfig& config, const ModelConfig& model_config, const std::vector<Example>& train,
                        const std::vector<Example>& val, const EmbeddingTable& table,
                        const EpochCallback& on_epoch = {});

/// epoch, train losses, validation losses, validation metrics.
void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

// --- experiments ------------------------------------------------------------------------

struct ExperimentData {
    GridShape grid;
    Vocabulary vocab;
    LabelMap topics;
    LabelMap sentiments;
    EmbeddingTable table;
    SentenceEncoder encoder;
    std::vector<Document> train;
    std::vector<Document> val;
    std::vector<Document> test;
};

/// Vocabulary and label maps come from train_raw only; a stratified
/// val_fraction of train_raw becomes the validation split.
ExperimentData build_experiment(const std::vector<RawDocument>& train_raw, const std::vector<RawDocument>& test_raw,
                                const std::vector<std::pair<std::string, std::vector<float>>>& vectors,
                                SentenceEncoder encoder, const GridShape& grid, double val_fraction,
                                std::uint64_t split_seed);

struct DataSources {
    std::filesystem::path train;
    std::filesystem::path test;  // optional
    std::filesystem::path vectors;
    std::filesystem::path sentence_vectors;  // optional; mean pooling when empty
};

ExperimentData load_experiment(const DataSources& src, const GridShape& grid, double val_fraction,
                               std::uint64_t split_seed);

/// Model config with label counts, embedding size and grid taken from data.
ModelConfig model_config_for(const ExperimentData& data, ModelConfig base, const TrainConfig& config);

struct RunResult {
    TrainResult train;
    Metrics test;
    std::vector<Example> test_examples;
};

RunResult run_experiment(const ExperimentData& data, const TrainConfig& config, const ModelConfig& base,
                         const EpochCallback& on_epoch = {});

struct AblationRow {
    Ablation ablation = Ablation::full;
    std::vector<double> exact_match;  // per seed
    std::vector<double> topic_accuracy;
    std::vector<double> sentiment_accuracy;
    double mean_exact = 0.0;
    double sd_exact = 0.0;
};

struct AblationReport {
    std::vector<std::uint64_t> seeds;
    std::vector<AblationRow> rows;  // full, no_boundary, no_aux, rgb

    const AblationRow& row(Ablation a) const;
    std::string to_markdown() const;
};

/// Trains every ablation for every seed (the seed replaces config.seed) and
/// reports test exact-match as mean +- sample sd. Needs a joint main task.
AblationReport run_ablation_suite(const ExperimentData& data, const TrainConfig& config, const ModelConfig& base,
                                  const std::vector<std::uint64_t>& seeds,
                                  const std::function<void(Ablation, std::uint64_t, const RunResult&)>& on_run = {});

}  // namespace semimage
