#include "semimage/metrics.hpp"

#include "semimage/error.hpp"

namespace semimage {

TaskMetrics compute_task_metrics(std::span<const std::size_t> pred, std::span<const std::size_t> gold,
                                 std::size_t num_classes) {
    if (pred.size() != gold.size()) throw DataError("metrics: prediction/label count mismatch");
    TaskMetrics m;
    m.count = pred.size();
    m.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] >= num_classes || gold[i] >= num_classes) throw DataError("metrics: class id out of range");
        ++m.confusion[gold[i]][pred[i]];
        correct += pred[i] == gold[i] ? 1 : 0;
    }
    m.accuracy = m.count ? static_cast<double>(correct) / static_cast<double>(m.count) : 0.0;
    m.f1.assign(num_classes, 0.0);
    double f1_sum = 0.0;
    std::size_t present = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
        std::size_t tp = m.confusion[k][k];
        std::size_t gold_k = 0;
        std::size_t pred_k = 0;
        for (std::size_t j = 0; j < num_classes; ++j) {
            gold_k += m.confusion[k][j];
            pred_k += m.confusion[j][k];
        }
        const double p = pred_k ? static_cast<double>(tp) / static_cast<double>(pred_k) : 0.0;
        const double r = gold_k ? static_cast<double>(tp) / static_cast<double>(gold_k) : 0.0;
        m.f1[k] = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        if (gold_k + pred_k > 0) {
            f1_sum += m.f1[k];
            ++present;
        }
    }
    m.macro_f1 = present ? f1_sum / static_cast<double>(present) : 0.0;
    return m;
}

double exact_match(std::span<const std::size_t> pred_topic, std::span<const std::size_t> gold_topic,
                   std::span<const std::size_t> pred_sentiment, std::span<const std::size_t> gold_sentiment) {
    const auto n = pred_topic.size();
    if (gold_topic.size() != n || pred_sentiment.size() != n || gold_sentiment.size() != n)
        throw DataError("exact_match: length mismatch");
    if (n == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i)
        hits += (pred_topic[i] == gold_topic[i] && pred_sentiment[i] == gold_sentiment[i]) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(n);
}

nlohmann::ordered_json to_json(const TaskMetrics& m) {
    nlohmann::ordered_json j;
    j["count"] = m.count;
    j["accuracy"] = m.accuracy;
    j["macro_f1"] = m.macro_f1;
    j["f1"] = m.f1;
    j["confusion"] = m.confusion;
    return j;
}

nlohmann::ordered_json to_json(const Metrics& m) {
    nlohmann::ordered_json j;
    if (m.topic) j["topic"] = to_json(*m.topic);
    if (m.sentiment) j["sentiment"] = to_json(*m.sentiment);
    if (m.exact_match) j["exact_match"] = *m.exact_match;
    j["loss_total"] = m.loss_total;
    return j;
}

}  // namespace semimage
