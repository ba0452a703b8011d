#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace semimage {

using TokenId = std::uint32_t;

inline constexpr std::string_view kPadSurface = "<pad>";
inline constexpr std::string_view kUnkSurface = "<unk>";
inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;

struct Token {
    TokenId id = kUnkId;
    std::string surface;
    bool is_pad = false;

    static Token pad() { return {kPadId, std::string(kPadSurface), true}; }
    bool operator==(const Token&) const = default;
};

/// One image row worth of tokens: exactly L entries, pads only in a suffix.
struct Sentence {
    std::vector<Token> tokens;
    std::size_t raw_len = 0;

    bool operator==(const Sentence&) const = default;
};

struct Document {
    std::string doc_id;
    std::vector<Sentence> sentences;
    std::optional<int> topic;
    std::optional<int> sentiment;

    bool operator==(const Document&) const = default;
};

/// Grid geometry: tokens per sentence row (L) and the sentence cap (N_max).
struct GridShape {
    std::size_t sentence_len = 40;
    std::size_t max_sentences = 40;

    bool operator==(const GridShape&) const = default;
};

/// Surface <-> id map. Ids 0 and 1 are reserved for <pad> and <unk>.
class Vocabulary {
public:
    Vocabulary();

    TokenId add(std::string_view surface);
    /// Returns kUnkId for surfaces that were never added.
    TokenId id_of(std::string_view surface) const;
    bool contains(std::string_view surface) const;
    const std::string& surface(TokenId id) const;
    std::size_t size() const { return surfaces_.size(); }

    /// Text file, one "surface<TAB>id" line per entry in id order.
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

private:
    std::vector<std::string> surfaces_;
    std::unordered_map<std::string, TokenId> ids_;
};

/// Dense ids for label strings. Ids follow lexicographic label order so that
/// the mapping does not depend on corpus line order.
class LabelMap {
public:
    LabelMap() = default;
    explicit LabelMap(std::vector<std::string> labels);

    /// Throws DataError for labels outside the map.
    int id_of(std::string_view label) const;
    const std::string& label(int id) const { return labels_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return labels_.size(); }
    bool empty() const { return labels_.empty(); }

    /// "label<TAB>id" per line, sorted by id.
    void save(const std::filesystem::path& path) const;
    static LabelMap load(const std::filesystem::path& path);

private:
    std::vector<std::string> labels_;
};

/// A corpus record before tokenization (one JSON Lines object).
struct RawDocument {
    std::string id;
    std::string text;
    std::optional<std::string> topic;
    std::optional<std::string> sentiment;

    bool operator==(const RawDocument&) const = default;
};

std::vector<std::string> split_sentences(std::string_view text);

/// Lowercased word surfaces of a sentence, punctuation split off the edges.
std::vector<std::string> split_words(std::string_view sentence);

std::vector<Token> tokenize(std::string_view sentence, const Vocabulary& vocab);

Sentence pad_truncate(std::vector<Token> tokens, std::size_t sentence_len);

Document truncate_document(Document doc, std::size_t max_sentences);

std::vector<RawDocument> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<RawDocument>& docs);

/// Vocabulary over every word surface of the given documents, in order of
/// first appearance.
Vocabulary build_vocabulary(const std::vector<RawDocument>& docs);

/// Label maps over the labels present in docs.
LabelMap build_topic_labels(const std::vector<RawDocument>& docs);
LabelMap build_sentiment_labels(const std::vector<RawDocument>& docs);

/// split_sentences -> tokenize -> pad_truncate -> truncate_document.
/// Labels go through the given maps; an unknown label is a DataError.
/// Documents without any sentence get a single all-pad sentence.
Document encode_document(const RawDocument& raw, const Vocabulary& vocab, const LabelMap& topics,
                         const LabelMap& sentiments, const GridShape& grid);

std::vector<Document> encode_documents(const std::vector<RawDocument>& raws, const Vocabulary& vocab,
                                       const LabelMap& topics, const LabelMap& sentiments,
                                       const GridShape& grid);

/// Reads and encodes a JSON Lines corpus in one go.
std::vector<Document> load_jsonl(const std::filesystem::path& path, const Vocabulary& vocab,
                                 const LabelMap& topics, const LabelMap& sentiments,
                                 const GridShape& grid);

/// Stratified by (topic, sentiment): from each cell, round(fraction * size)
/// documents (chosen by a seeded shuffle) go to the holdout side. Relative
/// order of the input is preserved on both sides.
struct Split {
    std::vector<RawDocument> kept;
    std::vector<RawDocument> holdout;
};
Split stratified_split(const std::vector<RawDocument>& docs, double holdout_fraction, std::uint64_t seed);

// --- synthetic multi-label corpora -----------------------------------------

struct CorpusSpec {
    std::size_t num_topics = 5;
    std::size_t num_sentiments = 2;
    std::size_t docs_per_cell = 250;
    std::size_t min_sentences = 3;
    std::size_t max_sentences = 6;
    std::size_t min_words = 6;
    std::size_t max_words = 12;
    std::size_t topic_vocab_size = 40;
    std::size_t sentiment_lexicon_size = 12;
    std::size_t function_vocab_size = 8;
    double function_word_rate = 0.2;
    double mix_noise = 0.1;
    std::size_t embedding_dim = 32;
    double embedding_noise = 0.6;
    std::uint64_t seed = 7;

    /// Throws UsageError when a count or range is invalid.
    void validate() const;
};

struct SyntheticCorpus {
    std::vector<RawDocument> docs;
    std::vector<std::vector<std::string>> topic_words;
    std::vector<std::vector<std::string>> sentiment_words;
    std::vector<std::string> function_words;
    std::vector<std::string> topic_names;
    std::vector<std::string> sentiment_names;
    /// Word vectors for every surface the generator can emit, clustered by
    /// topic / polarity, in the order they are written to the vector file.
    std::vector<std::pair<std::string, std::vector<float>>> vectors;
};

/// Pure function of spec. Topic vocabularies are pairwise disjoint and
/// disjoint from the sentiment lexicons. Documents are balanced across
/// (topic, sentiment) cells and shuffled.
SyntheticCorpus generate_synthetic(const CorpusSpec& spec);

}  // namespace semimage
