#include "semimage/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "semimage/error.hpp"
#include "semimage/rng.hpp"

namespace semimage {
namespace {

// Byte length of the UTF-8 whitespace code point starting at s[i], or 0.
std::size_t whitespace_len(std::string_view s, std::size_t i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') return 1;
    auto byte = [&](std::size_t k) {
        return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) : 0u;
    };
    if (c == 0xC2 && (byte(1) == 0x85 || byte(1) == 0xA0)) return 2;  // NEL, NBSP
    if (c == 0xE1 && byte(1) == 0x9A && byte(2) == 0x80) return 3;     // U+1680
    if (c == 0xE2 && byte(1) == 0x80) {
        const auto b = byte(2);
        if ((b >= 0x80 && b <= 0x8A) || b == 0xA8 || b == 0xA9 || b == 0xAF) return 3;
    }
    if (c == 0xE2 && byte(1) == 0x81 && byte(2) == 0x9F) return 3;  // U+205F
    if (c == 0xE3 && byte(1) == 0x80 && byte(2) == 0x80) return 3;  // U+3000
    return 0;
}

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_ascii_punct(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && std::ispunct(u) != 0;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e) {
        const auto n = whitespace_len(s, b);
        if (n == 0) break;
        b += n;
    }
    // Trailing whitespace: scan forward so multi-byte sequences are honored.
    std::size_t last_non_ws = b;
    for (std::size_t i = b; i < e;) {
        const auto n = whitespace_len(s, i);
        if (n == 0) {
            ++i;
            last_non_ws = i;
        } else {
            i += n;
        }
    }
    return std::string(s.substr(b, last_non_ws - b));
}

std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw DataError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

}  // namespace

// --- Vocabulary ---------------------------------------------------------------

Vocabulary::Vocabulary() {
    add(kPadSurface);
    add(kUnkSurface);
}

TokenId Vocabulary::add(std::string_view surface) {
    const std::string key(surface);
    if (const auto it = ids_.find(key); it != ids_.end()) return it->second;
    const auto id = static_cast<TokenId>(surfaces_.size());
    surfaces_.push_back(key);
    ids_.emplace(key, id);
    return id;
}

TokenId Vocabulary::id_of(std::string_view surface) const {
    const auto it = ids_.find(std::string(surface));
    return it == ids_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view surface) const {
    return ids_.contains(std::string(surface));
}

const std::string& Vocabulary::surface(TokenId id) const { return surfaces_.at(id); }

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (std::size_t i = 0; i < surfaces_.size(); ++i) out << surfaces_[i] << '\t' << i << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    Vocabulary vocab;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto tab = line.rfind('\t');
        if (tab == std::string::npos)
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected surface<TAB>id");
        const auto surface = line.substr(0, tab);
        const auto id = std::stoul(line.substr(tab + 1));
        if (vocab.add(surface) != id)
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": ids must be dense and ordered");
    }
    return vocab;
}

// --- LabelMap -------------------------------------------------------------------

LabelMap::LabelMap(std::vector<std::string> labels) : labels_(std::move(labels)) {
    std::sort(labels_.begin(), labels_.end());
    labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
}

int LabelMap::id_of(std::string_view label) const {
    const auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
    if (it == labels_.end() || *it != label) throw DataError("unknown label '" + std::string(label) + "'");
    return static_cast<int>(it - labels_.begin());
}

void LabelMap::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (std::size_t i = 0; i < labels_.size(); ++i) out << labels_[i] << '\t' << i << '\n';
}

LabelMap LabelMap::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.rfind('\t');
        if (tab == std::string::npos || std::stoul(line.substr(tab + 1)) != labels.size())
            throw DataError(path.string() + ": malformed label map");
        labels.push_back(line.substr(0, tab));
    }
    LabelMap map;
    map.labels_ = std::move(labels);
    if (!std::is_sorted(map.labels_.begin(), map.labels_.end()))
        throw DataError(path.string() + ": labels must be sorted by id");
    return map;
}

// --- text processing -------------------------------------------------------------

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (!is_terminal(text[i])) continue;
        const bool at_end = i + 1 == text.size();
        if (!at_end && whitespace_len(text, i + 1) == 0) continue;
        auto piece = trim(text.substr(start, i + 1 - start));
        if (!piece.empty()) out.push_back(std::move(piece));
        start = i + 1;
    }
    auto tail = trim(text.substr(std::min(start, text.size())));
    if (!tail.empty()) out.push_back(std::move(tail));
    return out;
}

std::vector<std::string> split_words(std::string_view sentence) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < sentence.size()) {
        if (const auto n = whitespace_len(sentence, i); n > 0) {
            i += n;
            continue;
        }
        std::size_t j = i;
        while (j < sentence.size() && whitespace_len(sentence, j) == 0) ++j;
        std::string_view chunk = sentence.substr(i, j - i);
        i = j;

        std::size_t b = 0;
        std::size_t e = chunk.size();
        while (b < e && is_ascii_punct(chunk[b])) ++b;
        while (e > b && is_ascii_punct(chunk[e - 1])) --e;
        for (std::size_t k = 0; k < b; ++k) out.emplace_back(1, chunk[k]);
        if (e > b) {
            std::string word(chunk.substr(b, e - b));
            for (auto& c : word) {
                if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
            }
            out.push_back(std::move(word));
        }
        for (std::size_t k = std::max(e, b); k < chunk.size(); ++k) out.emplace_back(1, chunk[k]);
    }
    return out;
}

std::vector<Token> tokenize(std::string_view sentence, const Vocabulary& vocab) {
    std::vector<Token> out;
    for (auto& surface : split_words(sentence)) {
        const auto id = vocab.id_of(surface);
        out.push_back(Token{id, std::move(surface), false});
    }
    return out;
}

Sentence pad_truncate(std::vector<Token> tokens, std::size_t sentence_len) {
    if (sentence_len == 0) throw UsageError("sentence length must be >= 1");
    Sentence s;
    s.raw_len = std::min(tokens.size(), sentence_len);
    tokens.resize(s.raw_len);
    tokens.resize(sentence_len, Token::pad());
    s.tokens = std::move(tokens);
    return s;
}

Document truncate_document(Document doc, std::size_t max_sentences) {
    if (max_sentences == 0) throw UsageError("max sentences must be >= 1");
    if (doc.sentences.size() > max_sentences) doc.sentences.resize(max_sentences);
    return doc;
}

// --- JSON Lines ----------------------------------------------------------------------

std::vector<RawDocument> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::vector<RawDocument> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            const auto obj = nlohmann::json::parse(line);
            if (!obj.is_object()) throw DataError("expected a JSON object");
            RawDocument doc;
            const auto text = obj.find("text");
            if (text == obj.end() || !text->is_string()) throw DataError("missing string field 'text'");
            doc.text = text->get<std::string>();
            doc.id = optional_string(obj, "id").value_or("line" + std::to_string(lineno));
            doc.topic = optional_string(obj, "topic");
            doc.sentiment = optional_string(obj, "sentiment");
            docs.push_back(std::move(doc));
        } catch (const std::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return docs;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<RawDocument>& docs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& d : docs) {
        nlohmann::ordered_json obj;
        obj["id"] = d.id;
        obj["text"] = d.text;
        if (d.topic) obj["topic"] = *d.topic;
        if (d.sentiment) obj["sentiment"] = *d.sentiment;
        out << obj.dump() << '\n';
    }
}

Vocabulary build_vocabulary(const std::vector<RawDocument>& docs) {
    Vocabulary vocab;
    for (const auto& d : docs) {
        for (const auto& s : split_sentences(d.text)) {
            for (const auto& w : split_words(s)) vocab.add(w);
        }
    }
    return vocab;
}

LabelMap build_topic_labels(const std::vector<RawDocument>& docs) {
    std::vector<std::string> labels;
    for (const auto& d : docs) {
        if (d.topic) labels.push_back(*d.topic);
    }
    return LabelMap(std::move(labels));
}

LabelMap build_sentiment_labels(const std::vector<RawDocument>& docs) {
    std::vector<std::string> labels;
    for (const auto& d : docs) {
        if (d.sentiment) labels.push_back(*d.sentiment);
    }
    return LabelMap(std::move(labels));
}

Document encode_document(const RawDocument& raw, const Vocabulary& vocab, const LabelMap& topics,
                         const LabelMap& sentiments, const GridShape& grid) {
    Document doc;
    doc.doc_id = raw.id;
    for (const auto& s : split_sentences(raw.text)) {
        doc.sentences.push_back(pad_truncate(tokenize(s, vocab), grid.sentence_len));
    }
    if (doc.sentences.empty()) doc.sentences.push_back(pad_truncate({}, grid.sentence_len));
    if (raw.topic) doc.topic = topics.id_of(*raw.topic);
    if (raw.sentiment) doc.sentiment = sentiments.id_of(*raw.sentiment);
    return truncate_document(std::move(doc), grid.max_sentences);
}

std::vector<Document> encode_documents(const std::vector<RawDocument>& raws, const Vocabulary& vocab,
                                       const LabelMap& topics, const LabelMap& sentiments,
                                       const GridShape& grid) {
    std::vector<Document> docs(raws.size());
    // Exceptions must not escape an OpenMP region; record the first one instead.
    std::vector<std::string> errors(raws.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(raws.size()); ++i) {
        try {
            docs[i] = encode_document(raws[i], vocab, topics, sentiments, grid);
        } catch (const std::exception& e) {
            errors[i] = "document '" + raws[i].id + "': " + e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) throw DataError(e);
    }
    return docs;
}

std::vector<Document> load_jsonl(const std::filesystem::path& path, const Vocabulary& vocab,
                                 const LabelMap& topics, const LabelMap& sentiments,
                                 const GridShape& grid) {
    return encode_documents(read_jsonl(path), vocab, topics, sentiments, grid);
}

Split stratified_split(const std::vector<RawDocument>& docs, double holdout_fraction, std::uint64_t seed) {
    if (holdout_fraction < 0.0 || holdout_fraction > 1.0) throw UsageError("holdout fraction must be in [0,1]");
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> cells;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        cells[{docs[i].topic.value_or(""), docs[i].sentiment.value_or("")}].push_back(i);
    }
    Rng rng(seed);
    std::vector<bool> held(docs.size(), false);
    for (auto& [key, members] : cells) {
        shuffle(members.begin(), members.end(), rng);
        const auto n = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(members.size())));
        for (std::size_t k = 0; k < n; ++k) held[members[k]] = true;
    }
    Split split;
    for (std::size_t i = 0; i < docs.size(); ++i) (held[i] ? split.holdout : split.kept).push_back(docs[i]);
    return split;
}

// --- synthetic corpora ----------------------------------------------------------------

void CorpusSpec::validate() const {
    if (num_topics == 0 || num_sentiments == 0) throw UsageError("corpus spec: need at least one topic and sentiment");
    if (topic_vocab_size == 0 || sentiment_lexicon_size == 0)
        throw UsageError("corpus spec: vocabulary sizes must be positive");
    if (docs_per_cell == 0) throw UsageError("corpus spec: docs_per_cell must be positive");
    if (min_sentences == 0 || min_sentences > max_sentences) throw UsageError("corpus spec: bad sentence range");
    if (min_words < 2 || min_words > max_words) throw UsageError("corpus spec: bad words-per-sentence range (min 2)");
    if (mix_noise < 0.0 || mix_noise > 1.0) throw UsageError("corpus spec: mix_noise must be in [0,1]");
    if (function_word_rate < 0.0 || function_word_rate >= 1.0)
        throw UsageError("corpus spec: function_word_rate must be in [0,1)");
    if (mix_noise > 0.0 && num_topics < 2) throw UsageError("corpus spec: mix_noise needs at least two topics");
    if (embedding_dim == 0) throw UsageError("corpus spec: embedding_dim must be positive");
}

SyntheticCorpus generate_synthetic(const CorpusSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    SyntheticCorpus corpus;

    static const char* kFunctionWords[] = {"the", "a", "of", "and", "to", "is", "in", "it",
                                           "that", "was", "for", "on", "with", "as", "this", "at"};
    for (std::size_t k = 0; k < spec.function_vocab_size; ++k) {
        corpus.function_words.push_back(k < std::size(kFunctionWords) ? std::string(kFunctionWords[k])
                                                                      : "fw" + std::to_string(k));
    }
    for (std::size_t t = 0; t < spec.num_topics; ++t) {
        corpus.topic_names.push_back("topic" + std::to_string(t));
        auto& words = corpus.topic_words.emplace_back();
        for (std::size_t k = 0; k < spec.topic_vocab_size; ++k)
            words.push_back("t" + std::to_string(t) + "w" + std::to_string(k));
    }
    for (std::size_t s = 0; s < spec.num_sentiments; ++s) {
        std::string name;
        std::string stem;
        if (spec.num_sentiments == 2) {
            name = s == 0 ? "negative" : "positive";
            stem = s == 0 ? "neg" : "pos";
        } else {
            name = "sentiment" + std::to_string(s);
            stem = "s" + std::to_string(s) + "w";
        }
        corpus.sentiment_names.push_back(name);
        auto& words = corpus.sentiment_words.emplace_back();
        for (std::size_t k = 0; k < spec.sentiment_lexicon_size; ++k) words.push_back(stem + std::to_string(k));
    }

    // Word vectors: cluster centroid plus isotropic noise.
    const std::size_t d = spec.embedding_dim;
    auto centroid = [&] {
        std::vector<double> c(d);
        for (auto& x : c) x = normal(rng);
        return c;
    };
    auto around = [&](const std::vector<double>& c, double noise) {
        std::vector<float> v(d);
        for (std::size_t k = 0; k < d; ++k) v[k] = static_cast<float>(c[k] + noise * normal(rng));
        return v;
    };
    const std::vector<double> origin(d, 0.0);
    for (const auto& w : corpus.function_words) corpus.vectors.emplace_back(w, around(origin, spec.embedding_noise));
    corpus.vectors.emplace_back(".", around(origin, spec.embedding_noise));
    for (const auto& words : corpus.topic_words) {
        const auto c = centroid();
        for (const auto& w : words) corpus.vectors.emplace_back(w, around(c, spec.embedding_noise));
    }
    for (const auto& words : corpus.sentiment_words) {
        const auto c = centroid();
        for (const auto& w : words) corpus.vectors.emplace_back(w, around(c, spec.embedding_noise));
    }

    enum class Slot { function, sentiment, content, noise };
    auto pick = [&](const std::vector<std::string>& words) -> const std::string& {
        return words[uniform_index(rng, words.size())];
    };

    for (std::size_t t = 0; t < spec.num_topics; ++t) {
        for (std::size_t s = 0; s < spec.num_sentiments; ++s) {
            for (std::size_t n = 0; n < spec.docs_per_cell; ++n) {
                const auto num_sentences = uniform_int(rng, spec.min_sentences, spec.max_sentences);
                std::vector<std::vector<Slot>> layout(num_sentences);
                std::vector<Slot*> content;
                for (auto& sentence : layout) {
                    const auto len = uniform_int(rng, spec.min_words, spec.max_words);
                    sentence.assign(len, Slot::content);
                    const auto n_sent = len >= 8 ? uniform_int(rng, 1, 2) : 1;
                    for (std::uint64_t k = 0; k < n_sent;) {
                        auto& slot = sentence[uniform_index(rng, len)];
                        if (slot == Slot::sentiment) continue;
                        slot = Slot::sentiment;
                        ++k;
                    }
                    for (auto& slot : sentence) {
                        if (slot == Slot::content && uniform01(rng) < spec.function_word_rate) slot = Slot::function;
                    }
                }
                for (auto& sentence : layout) {
                    for (auto& slot : sentence) {
                        if (slot == Slot::content) content.push_back(&slot);
                    }
                }
                // Exactly floor(mix_noise * content) off-topic words per document.
                const auto n_noise = static_cast<std::size_t>(
                    std::floor(spec.mix_noise * static_cast<double>(content.size())));
                shuffle(content.begin(), content.end(), rng);
                for (std::size_t k = 0; k < n_noise; ++k) *content[k] = Slot::noise;

                std::string text;
                for (const auto& sentence : layout) {
                    if (!text.empty()) text += ' ';
                    bool first = true;
                    for (const auto slot : sentence) {
                        if (!first) text += ' ';
                        first = false;
                        switch (slot) {
                            case Slot::function: text += pick(corpus.function_words); break;
                            case Slot::sentiment: text += pick(corpus.sentiment_words[s]); break;
                            case Slot::content: text += pick(corpus.topic_words[t]); break;
                            case Slot::noise: {
                                auto other = uniform_index(rng, spec.num_topics - 1);
                                if (other >= t) ++other;
                                text += pick(corpus.topic_words[other]);
                                break;
                            }
                        }
                    }
                    text += '.';
                }
                corpus.docs.push_back(RawDocument{"", std::move(text), corpus.topic_names[t], corpus.sentiment_names[s]});
            }
        }
    }
    shuffle(corpus.docs.begin(), corpus.docs.end(), rng);
    for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "syn%06zu", i);
        corpus.docs[i].id = id;
    }
    return corpus;
}

}  // namespace semimage
