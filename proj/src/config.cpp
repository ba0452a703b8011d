#include "semimage/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "semimage/error.hpp"

namespace semimage {

namespace toml {

namespace {

class Parser {
public:
    Parser(std::string_view line, const std::string& where) : s_(line), where_(where) {}

    [[noreturn]] void fail(const std::string& msg) const { throw UsageError(where_ + ": " + msg); }

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }
    bool at_end_or_comment() {
        skip_ws();
        return pos_ >= s_.size() || s_[pos_] == '#';
    }
    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

    std::string key() {
        skip_ws();
        if (peek() == '"') return string();
        const auto start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
                                    s_[pos_] == '-' || s_[pos_] == '.'))
            ++pos_;
        if (start == pos_) fail("expected a key");
        return std::string(s_.substr(start, pos_ - start));
    }

    void expect(char c) {
        skip_ws();
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    std::string string() {
        ++pos_;  // opening quote
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            char c = s_[pos_++];
            if (c == '\\') {
                if (pos_ >= s_.size()) fail("dangling escape");
                const char e = s_[pos_++];
                switch (e) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case '\\': c = '\\'; break;
                    case '"': c = '"'; break;
                    default: fail(std::string("unsupported escape \\") + e);
                }
            }
            out.push_back(c);
        }
        if (pos_ >= s_.size()) fail("unterminated string");
        ++pos_;
        return out;
    }

    std::string literal() {
        const auto close = s_.find('\'', ++pos_);
        if (close == std::string_view::npos) fail("unterminated string");
        std::string out(s_.substr(pos_, close - pos_));
        pos_ = close + 1;
        return out;
    }

    Value value() {
        skip_ws();
        const char c = peek();
        if (c == '"') return {string()};
        if (c == '\'') return {literal()};
        if (c == '[') {
            ++pos_;
            Array arr;
            skip_ws();
            if (peek() == ']') {
                ++pos_;
                return {arr};
            }
            while (true) {
                arr.push_back(value());
                skip_ws();
                if (peek() == ',') {
                    ++pos_;
                    skip_ws();
                    if (peek() == ']') {
                        ++pos_;
                        break;
                    }
                    continue;
                }
                if (peek() == ']') {
                    ++pos_;
                    break;
                }
                fail("expected ',' or ']' in array");
            }
            return {arr};
        }
        const auto start = pos_;
        while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '#' && s_[pos_] != ' ' &&
               s_[pos_] != '\t')
            ++pos_;
        std::string tok(s_.substr(start, pos_ - start));
        if (tok == "true") return {true};
        if (tok == "false") return {false};
        std::string digits;
        for (char ch : tok) {
            if (ch != '_') digits.push_back(ch);
        }
        if (digits.empty()) fail("expected a value");
        const bool is_float = digits.find_first_of(".eE") != std::string::npos || digits == "inf" || digits == "nan";
        const char* b = digits.data() + (digits[0] == '+' ? 1 : 0);
        const char* e = digits.data() + digits.size();
        if (is_float) {
            double d = 0;
            auto [p, ec] = std::from_chars(b, e, d);
            if (ec != std::errc() || p != e) fail("malformed number '" + tok + "'");
            return {d};
        }
        std::int64_t i = 0;
        auto [p, ec] = std::from_chars(b, e, i);
        if (ec != std::errc() || p != e) fail("malformed value '" + tok + "'");
        return {i};
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
    std::string where_;
};

}  // namespace

Document parse(std::string_view text, const std::string& origin) {
    Document doc;
    doc[""];
    std::string table;
    std::size_t lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++lineno;
        start = end + 1;
        Parser p(line, origin + ":" + std::to_string(lineno));
        if (p.at_end_or_comment()) {
            if (end == text.size()) break;
            continue;
        }
        if (p.peek() == '[') {
            p.expect('[');
            table = p.key();
            p.expect(']');
            if (!p.at_end_or_comment()) p.fail("trailing characters after table header");
            doc[table];
        } else {
            const auto k = p.key();
            p.expect('=');
            auto v = p.value();
            if (!p.at_end_or_comment()) p.fail("trailing characters after value");
            if (!doc[table].emplace(k, std::move(v)).second) p.fail("duplicate key '" + k + "'");
        }
        if (end == text.size()) break;
    }
    return doc;
}

Document parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

}  // namespace toml

namespace {

using Table = std::map<std::string, toml::Value>;

std::string where(const std::string& table, const std::string& key) {
    return table.empty() ? key : table + "." + key;
}

double get_double(const std::string& t, const std::string& k, const toml::Value& v) {
    if (v.is_float()) return std::get<double>(v.v);
    if (v.is_int()) return static_cast<double>(std::get<std::int64_t>(v.v));
    throw UsageError(where(t, k) + ": expected a number");
}

std::uint64_t get_uint(const std::string& t, const std::string& k, const toml::Value& v) {
    if (!v.is_int() || std::get<std::int64_t>(v.v) < 0)
        throw UsageError(where(t, k) + ": expected a non-negative integer");
    return static_cast<std::uint64_t>(std::get<std::int64_t>(v.v));
}

bool get_bool(const std::string& t, const std::string& k, const toml::Value& v) {
    if (!v.is_bool()) throw UsageError(where(t, k) + ": expected true or false");
    return std::get<bool>(v.v);
}

std::string get_string(const std::string& t, const std::string& k, const toml::Value& v) {
    if (!v.is_string()) throw UsageError(where(t, k) + ": expected a string");
    return std::get<std::string>(v.v);
}

std::vector<std::size_t> get_uint_list(const std::string& t, const std::string& k, const toml::Value& v) {
    if (!v.is_array()) throw UsageError(where(t, k) + ": expected an array of integers");
    std::vector<std::size_t> out;
    for (const auto& x : std::get<toml::Array>(v.v)) out.push_back(get_uint(t, k, x));
    return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return {};
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::string fmt(double d) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    std::string s(buf);
    if (s.find_first_of(".en") == std::string::npos) s += ".0";
    return s;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out + "\"";
}

template <typename Seq>
std::string list(const Seq& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
    return out + "]";
}

}  // namespace

RunConfig run_config_from(const toml::Document& doc, const std::filesystem::path& base_dir) {
    RunConfig cfg;
    for (const auto& [table, entries] : doc) {
        for (const auto& [k, v] : entries) {
            if (table == "data") {
                if (k == "train") cfg.data.train = resolve(base_dir, get_string(table, k, v));
                else if (k == "test") cfg.data.test = resolve(base_dir, get_string(table, k, v));
                else if (k == "vectors") cfg.data.vectors = resolve(base_dir, get_string(table, k, v));
                else if (k == "sentence_vectors") cfg.data.sentence_vectors = resolve(base_dir, get_string(table, k, v));
                else if (k == "sentence_len") cfg.grid.sentence_len = get_uint(table, k, v);
                else if (k == "max_sentences") cfg.grid.max_sentences = get_uint(table, k, v);
                else if (k == "split_seed") cfg.split_seed = get_uint(table, k, v);
                else throw UsageError("unknown key " + where(table, k));
            } else if (table == "model") {
                if (k == "mapper_hidden") cfg.model.mapper_hidden = get_uint(table, k, v);
                else if (k == "blocks") cfg.model.blocks = get_uint_list(table, k, v);
                else if (k == "kernel") cfg.model.kernel = get_uint(table, k, v);
                else if (k == "head_hidden") cfg.model.head_hidden = get_uint(table, k, v);
                else if (k == "aux_hidden") cfg.model.aux_hidden = get_uint(table, k, v);
                else throw UsageError("unknown key " + where(table, k));
            } else if (table == "train") {
                auto& t = cfg.train;
                if (k == "lambda1") t.lambda1 = get_double(table, k, v);
                else if (k == "lambda2") t.lambda2 = get_double(table, k, v);
                else if (k == "lr") t.lr = get_double(table, k, v);
                else if (k == "max_epochs") t.max_epochs = get_uint(table, k, v);
                else if (k == "early_stop_patience") t.early_stop_patience = get_uint(table, k, v);
                else if (k == "batch_size") t.batch_size = get_uint(table, k, v);
                else if (k == "seed") t.seed = get_uint(table, k, v);
                else if (k == "ablation") t.ablation = parse_ablation(get_string(table, k, v));
                else if (k == "aux_pool") t.aux_pool = parse_aux_pool(get_string(table, k, v));
                else if (k == "main_task") t.main_task = parse_main_task(get_string(table, k, v));
                else if (k == "val_fraction") t.val_fraction = get_double(table, k, v);
                else if (k == "detach_main") t.detach_main = get_bool(table, k, v);
                else throw UsageError("unknown key " + where(table, k));
            } else if (table == "ablation") {
                if (k == "seeds") {
                    if (v.is_int()) {
                        const auto n = get_uint(table, k, v);
                        cfg.ablation_seeds.clear();
                        for (std::uint64_t i = 1; i <= n; ++i) cfg.ablation_seeds.push_back(i);
                    } else {
                        const auto seeds = get_uint_list(table, k, v);
                        cfg.ablation_seeds.assign(seeds.begin(), seeds.end());
                    }
                } else {
                    throw UsageError("unknown key " + where(table, k));
                }
            } else {
                if (table.empty()) throw UsageError("key '" + k + "' must sit inside a table");
                throw UsageError("unknown table [" + table + "]");
            }
        }
    }
    cfg.train.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    const auto doc = toml::parse_file(path);
    for (const auto& [table, entries] : doc) {
        if (!entries.empty() || table.empty()) continue;
        if (table != "data" && table != "model" && table != "train" && table != "ablation")
            throw UsageError(path.string() + ": unknown table [" + table + "]");
    }
    return run_config_from(doc, path.parent_path());
}

std::string to_toml(const RunConfig& cfg) {
    std::ostringstream s;
    s << "[data]\n";
    s << "train = " << quote(cfg.data.train.string()) << '\n';
    if (!cfg.data.test.empty()) s << "test = " << quote(cfg.data.test.string()) << '\n';
    s << "vectors = " << quote(cfg.data.vectors.string()) << '\n';
    if (!cfg.data.sentence_vectors.empty())
        s << "sentence_vectors = " << quote(cfg.data.sentence_vectors.string()) << '\n';
    s << "sentence_len = " << cfg.grid.sentence_len << '\n';
    s << "max_sentences = " << cfg.grid.max_sentences << '\n';
    s << "split_seed = " << cfg.split_seed << '\n';
    s << "\n[model]\n";
    s << "mapper_hidden = " << cfg.model.mapper_hidden << '\n';
    s << "blocks = " << list(cfg.model.blocks) << '\n';
    s << "kernel = " << cfg.model.kernel << '\n';
    s << "head_hidden = " << cfg.model.head_hidden << '\n';
    s << "aux_hidden = " << cfg.model.aux_hidden << '\n';
    const auto& t = cfg.train;
    s << "\n[train]\n";
    s << "lambda1 = " << fmt(t.lambda1) << '\n';
    s << "lambda2 = " << fmt(t.lambda2) << '\n';
    s << "lr = " << fmt(t.lr) << '\n';
    s << "max_epochs = " << t.max_epochs << '\n';
    s << "early_stop_patience = " << t.early_stop_patience << '\n';
    s << "batch_size = " << t.batch_size << '\n';
    s << "seed = " << t.seed << '\n';
    s << "ablation = " << quote(to_string(t.ablation)) << '\n';
    s << "aux_pool = " << quote(to_string(t.aux_pool)) << '\n';
    s << "main_task = " << quote(to_string(t.main_task)) << '\n';
    s << "val_fraction = " << fmt(t.val_fraction) << '\n';
    s << "detach_main = " << (t.detach_main ? "true" : "false") << '\n';
    s << "\n[ablation]\n";
    s << "seeds = " << list(cfg.ablation_seeds) << '\n';
    return s.str();
}

CorpusSpec corpus_spec_from(const toml::Document& doc) {
    CorpusSpec spec;
    for (const auto& [table, entries] : doc) {
        if (!table.empty() && table != "corpus") throw UsageError("unknown table [" + table + "]");
        for (const auto& [k, v] : entries) {
            if (k == "num_topics") spec.num_topics = get_uint(table, k, v);
            else if (k == "num_sentiments") spec.num_sentiments = get_uint(table, k, v);
            else if (k == "docs_per_cell") spec.docs_per_cell = get_uint(table, k, v);
            else if (k == "min_sentences") spec.min_sentences = get_uint(table, k, v);
            else if (k == "max_sentences") spec.max_sentences = get_uint(table, k, v);
            else if (k == "min_words") spec.min_words = get_uint(table, k, v);
            else if (k == "max_words") spec.max_words = get_uint(table, k, v);
            else if (k == "topic_vocab_size") spec.topic_vocab_size = get_uint(table, k, v);
            else if (k == "sentiment_lexicon_size") spec.sentiment_lexicon_size = get_uint(table, k, v);
            else if (k == "function_vocab_size") spec.function_vocab_size = get_uint(table, k, v);
            else if (k == "function_word_rate") spec.function_word_rate = get_double(table, k, v);
            else if (k == "mix_noise") spec.mix_noise = get_double(table, k, v);
            else if (k == "embedding_dim") spec.embedding_dim = get_uint(table, k, v);
            else if (k == "embedding_noise") spec.embedding_noise = get_double(table, k, v);
            else if (k == "seed") spec.seed = get_uint(table, k, v);
            else throw UsageError("unknown key " + where(table, k));
        }
    }
    spec.validate();
    return spec;
}

CorpusSpec load_corpus_spec(const std::filesystem::path& path) { return corpus_spec_from(toml::parse_file(path)); }

std::string to_toml(const CorpusSpec& spec) {
    std::ostringstream s;
    s << "[corpus]\n";
    s << "num_topics = " << spec.num_topics << '\n';
    s << "num_sentiments = " << spec.num_sentiments << '\n';
    s << "docs_per_cell = " << spec.docs_per_cell << '\n';
    s << "min_sentences = " << spec.min_sentences << '\n';
    s << "max_sentences = " << spec.max_sentences << '\n';
    s << "min_words = " << spec.min_words << '\n';
    s << "max_words = " << spec.max_words << '\n';
    s << "topic_vocab_size = " << spec.topic_vocab_size << '\n';
    s << "sentiment_lexicon_size = " << spec.sentiment_lexicon_size << '\n';
    s << "function_vocab_size = " << spec.function_vocab_size << '\n';
    s << "function_word_rate = " << fmt(spec.function_word_rate) << '\n';
    s << "mix_noise = " << fmt(spec.mix_noise) << '\n';
    s << "embedding_dim = " << spec.embedding_dim << '\n';
    s << "embedding_noise = " << fmt(spec.embedding_noise) << '\n';
    s << "seed = " << spec.seed << '\n';
    return s.str();
}

}  // namespace semimage
