#include "semimage/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "semimage/error.hpp"

namespace semimage {

EmbeddingTable::EmbeddingTable(std::size_t dim, std::size_t vocab_size)
    : dim_(dim), data_(dim * vocab_size, 0.0f), present_(vocab_size, false), unk_(dim, 0.0f), zero_(dim, 0.0f) {
    if (dim == 0) throw DataError("embedding dimension must be positive");
}

void EmbeddingTable::set(TokenId id, std::span<const float> v) {
    if (v.size() != dim_) throw DataError("embedding row has wrong dimension");
    if (id == kPadId) return;
    for (const float x : v) {
        if (!std::isfinite(x)) throw DataError("embedding row has a non-finite entry");
    }
    std::copy(v.begin(), v.end(), data_.begin() + static_cast<std::ptrdiff_t>(id * dim_));
    present_.at(id) = true;
}

void EmbeddingTable::set_unk(std::span<const float> v) {
    if (v.size() != dim_) throw DataError("unk vector has wrong dimension");
    unk_.assign(v.begin(), v.end());
}

std::span<const float> EmbeddingTable::lookup(TokenId id) const {
    if (id == kPadId) return zero_;
    if (id < present_.size() && present_[id]) return {data_.data() + id * dim_, dim_};
    return unk_;
}

std::span<const float> EmbeddingTable::lookup(const Token& token) const {
    if (token.is_pad) return zero_;
    return lookup(token.id);
}

EmbeddingTable EmbeddingTable::from_rows(const std::vector<std::pair<std::string, std::vector<float>>>& rows,
                                         const Vocabulary& vocab) {
    if (rows.empty()) throw DataError("no embedding rows");
    const auto dim = rows.front().second.size();
    EmbeddingTable table(dim, vocab.size());
    std::vector<double> sum(dim, 0.0);
    for (const auto& [surface, vec] : rows) {
        if (vec.size() != dim) throw DataError("embedding for '" + surface + "' has wrong dimension");
        for (std::size_t k = 0; k < dim; ++k) sum[k] += vec[k];
        if (vocab.contains(surface)) table.set(vocab.id_of(surface), vec);
    }
    std::vector<float> unk(dim);
    for (std::size_t k = 0; k < dim; ++k) unk[k] = static_cast<float>(sum[k] / static_cast<double>(rows.size()));
    table.set_unk(unk);
    return table;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path, const Vocabulary& vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::vector<std::pair<std::string, std::vector<float>>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string surface;
        fields >> surface;
        std::vector<float> vec;
        std::string tok;
        while (fields >> tok) {
            float x = 0.0f;
            const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
            if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(x))
                throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + tok + "'");
            vec.push_back(x);
        }
        if (vec.empty()) throw DataError(path.string() + ":" + std::to_string(lineno) + ": no vector");
        if (!rows.empty() && vec.size() != rows.front().second.size())
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": inconsistent dimension");
        rows.emplace_back(std::move(surface), std::move(vec));
    }
    return from_rows(rows, vocab);
}

void EmbeddingTable::save(const std::filesystem::path& path,
                          const std::vector<std::pair<std::string, std::vector<float>>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    char buf[64];
    for (const auto& [surface, vec] : rows) {
        out << surface;
        for (const float x : vec) {
            // Shortest representation that round-trips the float exactly.
            const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
            out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
        }
        out << '\n';
    }
}

// --- SentenceEncoder ----------------------------------------------------------------

SentenceEncoder SentenceEncoder::load_precomputed(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    SentenceEncoder enc;
    enc.mode_ = SentenceEncoderMode::precomputed;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto obj = nlohmann::json::parse(line);
            enc.add(obj.at("doc_id").get<std::string>(), obj.at("sent").get<std::size_t>(),
                    obj.at("vec").get<std::vector<double>>());
        } catch (const std::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return enc;
}

void SentenceEncoder::add(const std::string& doc_id, std::size_t sentence, std::vector<double> vec) {
    mode_ = SentenceEncoderMode::precomputed;
    vectors_[{doc_id, sentence}] = std::move(vec);
}

std::vector<double> SentenceEncoder::encode(const EmbeddingTable& table, const Sentence& sentence,
                                            const std::string& doc_id, std::size_t index) const {
    if (mode_ == SentenceEncoderMode::precomputed) {
        const auto it = vectors_.find({doc_id, index});
        if (it == vectors_.end())
            throw DataError("no precomputed sentence vector for doc '" + doc_id + "' sentence " +
                            std::to_string(index));
        return it->second;
    }
    std::vector<double> mean(table.dim(), 0.0);
    std::size_t count = 0;
    for (const auto& tok : sentence.tokens) {
        if (tok.is_pad) continue;
        const auto v = table.lookup(tok);
        for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += v[k];
        ++count;
    }
    if (count > 0) {
        for (auto& x : mean) x /= static_cast<double>(count);
    }
    return mean;
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DataError("cosine_sim: length mismatch (" + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 1.0;
    // sqrt(na * nb) makes a == b come out as exactly 1
    const double prod = na * nb;
    const double denom = std::isnormal(prod) ? std::sqrt(prod) : std::sqrt(na) * std::sqrt(nb);
    return std::clamp(dot / denom, -1.0, 1.0);
}

}  // namespace semimage
