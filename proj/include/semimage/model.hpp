#pragma once

// Full classifier: pixel mapper -> image -> CNN main heads, plus the auxiliary
// heads reading pooled hue (topic) and pooled saturation (sentiment).
//
// Gradient routing: the main loss reaches the CNN and, through the image, the
// mapper. The auxiliary losses reach their heads and the mapper through the
// pooled features; they never touch the CNN.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semimage/colormapper.hpp"
#include "semimage/corpus.hpp"
#include "semimage/embeddings.hpp"
#include "semimage/image.hpp"
#include "semimage/nnet/cnn.hpp"

namespace semimage {

enum class MainTask { topic, sentiment, joint };

struct ModelConfig {
    PixelSpace space = PixelSpace::hsv;
    bool boundaries = true;
    std::size_t embedding_dim = 32;
    std::size_t mapper_hidden = 64;
    std::vector<std::size_t> blocks{16, 32};
    std::size_t kernel = 3;
    std::size_t head_hidden = 32;
    std::size_t aux_hidden = 16;
    std::size_t num_topics = 2;
    std::size_t num_sentiments = 2;
    MainTask main_task = MainTask::joint;
    AuxPool aux_pool = AuxPool::mean;
    GridShape grid;

    /// Rows of the batch tensor: 2 N_max - 1, or N_max without boundary rows.
    std::size_t image_height() const { return boundaries ? 2 * grid.max_sentences - 1 : grid.max_sentences; }
    ImageMode image_mode() const { return {space, boundaries}; }
    bool has_topic_head() const { return main_task != MainTask::sentiment; }
    bool has_sentiment_head() const { return main_task != MainTask::topic; }
    nnet::CnnConfig cnn_config() const;

    std::string to_line() const;
    static ModelConfig from_line(const std::string& line);
    bool operator==(const ModelConfig&) const = default;
};

/// Topic head: (hbar_cos, hbar_sin) -> relu hidden -> topic logits.
/// Sentiment head: s_avg -> sentiment logits.
template <typename T>
struct AuxHeads {
    nnet::DenseLayer<T> topic_hidden;
    nnet::DenseLayer<T> topic_out;
    nnet::DenseLayer<T> sentiment_out;

    AuxHeads() = default;
    AuxHeads(std::size_t hidden, std::size_t topics, std::size_t sentiments)
        : topic_hidden(2, hidden), topic_out(hidden, topics), sentiment_out(1, sentiments) {}

    std::vector<std::span<T>> tensors() {
        return {topic_hidden.w, topic_hidden.b, topic_out.w, topic_out.b, sentiment_out.w, sentiment_out.b};
    }
    bool operator==(const AuxHeads&) const = default;
};

template <typename T>
class Model {
public:
    ModelConfig config;
    MapperParams<T> mapper;
    nnet::Cnn<T> cnn;
    AuxHeads<T> aux;

    Model() = default;
    /// All parameters zero.
    explicit Model(const ModelConfig& cfg);
    static Model init(const ModelConfig& cfg, std::uint64_t seed);

    /// Mapper, CNN, then aux tensors.
    std::vector<std::span<T>> tensors();
    std::vector<std::span<const T>> tensors() const;
    void set_zero();

    template <typename U>
    Model<U> cast() const;

    bool operator==(const Model&) const = default;
};

/// A document ready for training: parameter-free layout plus labels.
struct Example {
    std::string doc_id;
    ImagePlan plan;
    std::optional<int> topic;
    std::optional<int> sentiment;
};

Example make_example(const Document& doc, const EmbeddingTable& table, const SentenceEncoder& encoder,
                     const ModelConfig& cfg);
std::vector<Example> make_examples(const std::vector<Document>& docs, const EmbeddingTable& table,
                                   const SentenceEncoder& encoder, const ModelConfig& cfg);

struct LossWeights {
    double lambda1 = 0.5;
    double lambda2 = 0.5;
    /// Debug switch: drop the main-loss gradient (the main loss is still reported).
    bool detach_main = false;
};

struct LossBreakdown {
    double main = 0.0;
    double topic = 0.0;      // mean aux topic cross-entropy over docs with a topic label
    double sentiment = 0.0;  // same for sentiment
    double total = 0.0;      // main + lambda1 * topic + lambda2 * sentiment
};

struct BatchResult {
    LossBreakdown loss;
    std::vector<std::optional<std::size_t>> topic_pred;      // main-head predictions
    std::vector<std::optional<std::size_t>> sentiment_pred;
    std::vector<PooledFeatures> pooled;                      // HSV models only
};

/// Forward pass over a batch; with grad != nullptr the backward pass
/// accumulates parameter gradients into *grad.
template <typename T>
BatchResult forward_backward(const Model<T>& model, std::span<const Example* const> batch,
                             const EmbeddingTable& table, const LossWeights& weights, Model<T>* grad);

/// Checkpoint bundle: "SEMI-MODEL v1" line, the ModelConfig line, the mapper
/// checkpoint, the CNN checkpoint, then "SEMI-AUX v1" and the aux tensors as
/// float32 (topic_hidden w,b; topic_out w,b; sentiment_out w,b).
void write_model(std::ostream& out, const Model<float>& model);
Model<float> read_model(std::istream& in);
void save_model(const std::filesystem::path& path, const Model<float>& model);
Model<float> load_model(const std::filesystem::path& path);

}  // namespace semimage

namespace semimage {

std::string to_string(MainTask t);
std::string to_string(AuxPool p);
std::string to_string(PixelSpace s);
/// Throw UsageError on unknown names.
MainTask parse_main_task(std::string_view s);
AuxPool parse_aux_pool(std::string_view s);
PixelSpace parse_pixel_space(std::string_view s);

}  // namespace semimage
