#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semimage/corpus.hpp"

namespace semimage {

/// Frozen word vectors indexed by vocabulary id. <pad> resolves to zeros;
/// ids without a stored vector resolve to unk_vector.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(std::size_t dim, std::size_t vocab_size);

    /// Reads "surface v1 ... vd" lines and keeps the rows of surfaces present
    /// in vocab. unk_vector is the mean of every vector in the file.
    static EmbeddingTable load(const std::filesystem::path& path, const Vocabulary& vocab);

    /// Builds a table from in-memory (surface, vector) rows, same rules as load().
    static EmbeddingTable from_rows(const std::vector<std::pair<std::string, std::vector<float>>>& rows,
                                    const Vocabulary& vocab);

    static void save(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, std::vector<float>>>& rows);

    std::size_t dim() const { return dim_; }
    std::size_t vocab_size() const { return present_.size(); }

    std::span<const float> lookup(const Token& token) const;
    std::span<const float> lookup(TokenId id) const;
    bool has_vector(TokenId id) const { return id < present_.size() && present_[id]; }

    void set(TokenId id, std::span<const float> v);
    void set_unk(std::span<const float> v);
    std::span<const float> unk_vector() const { return unk_; }

private:
    std::size_t dim_ = 0;
    std::vector<float> data_;
    std::vector<bool> present_;
    std::vector<float> unk_;
    std::vector<float> zero_;
};

enum class SentenceEncoderMode { mean_pool, precomputed };

/// Sentence vectors s_i for boundary rows. Both modes are frozen.
class SentenceEncoder {
public:
    SentenceEncoder() = default;

    static SentenceEncoder mean_pool() { return {}; }
    /// JSON Lines {"doc_id": str, "sent": int, "vec": [floats]}.
    static SentenceEncoder load_precomputed(const std::filesystem::path& path);

    SentenceEncoderMode mode() const { return mode_; }
    void add(const std::string& doc_id, std::size_t sentence, std::vector<double> vec);

    /// mean_pool: mean of non-pad word vectors (zeros for an all-pad row).
    /// precomputed: stored vector; DataError naming doc_id/index if absent.
    std::vector<double> encode(const EmbeddingTable& table, const Sentence& sentence, const std::string& doc_id,
                               std::size_t index) const;

private:
    SentenceEncoderMode mode_ = SentenceEncoderMode::mean_pool;
    std::map<std::pair<std::string, std::size_t>, std::vector<double>> vectors_;
};

/// a.b / (|a||b|), clamped to [-1, 1]; 1.0 when either norm is zero.
double cosine_sim(std::span<const double> a, std::span<const double> b);

}  // namespace semimage
