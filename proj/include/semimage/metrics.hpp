#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace semimage {

struct TaskMetrics {
    std::size_t count = 0;
    double accuracy = 0.0;
    std::vector<double> f1;  // per class; 0 when precision + recall == 0
    /// Mean F1 over classes that occur in the gold labels or the predictions.
    double macro_f1 = 0.0;
    std::vector<std::vector<std::size_t>> confusion;  // [gold][pred]
};

TaskMetrics compute_task_metrics(std::span<const std::size_t> pred, std::span<const std::size_t> gold,
                                 std::size_t num_classes);

/// Fraction of documents with both predictions correct.
double exact_match(std::span<const std::size_t> pred_topic, std::span<const std::size_t> gold_topic,
                   std::span<const std::size_t> pred_sentiment, std::span<const std::size_t> gold_sentiment);

struct Metrics {
    std::optional<TaskMetrics> topic;
    std::optional<TaskMetrics> sentiment;
    std::optional<double> exact_match;
    double loss_total = 0.0;
};

nlohmann::ordered_json to_json(const TaskMetrics& m);
nlohmann::ordered_json to_json(const Metrics& m);

}  // namespace semimage
