#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>

#include "semimage/corpus.hpp"
#include "semimage/error.hpp"
#include "support.hpp"

using namespace semimage;
using semimage::testing::TempDir;

namespace {

std::vector<std::string> surfaces(const std::vector<Token>& tokens) {
    std::vector<std::string> out;
    for (const auto& t : tokens) out.push_back(t.surface);
    return out;
}

std::vector<Token> word_tokens(std::size_t n) {
    std::vector<Token> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(Token{static_cast<TokenId>(i + 2), "w" + std::to_string(i), false});
    return out;
}

std::string strip_ws(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    }
    return out;
}

CorpusSpec small_spec(std::uint64_t seed = 3) {
    CorpusSpec spec;
    spec.docs_per_cell = 12;
    spec.seed = seed;
    return spec;
}

}  // namespace

TEST(SplitSentences, TwoTerminalMarks) {
    EXPECT_EQ(split_sentences("Good food. Bad service!"), (std::vector<std::string>{"Good food.", "Bad service!"}));
}

TEST(SplitSentences, NoTerminalPunctuation) {
    EXPECT_EQ(split_sentences("hello"), (std::vector<std::string>{"hello"}));
}

TEST(SplitSentences, TrailingFragment) {
    EXPECT_EQ(split_sentences("A? B. C"), (std::vector<std::string>{"A?", "B.", "C"}));
}

TEST(SplitSentences, WhitespaceOnly) {
    EXPECT_TRUE(split_sentences("").empty());
    EXPECT_TRUE(split_sentences(" \t\n ").empty());
}

TEST(SplitSentences, NoSplitWithoutFollowingWhitespace) {
    EXPECT_EQ(split_sentences("e.g.this is 3.5 long. ok"),
              (std::vector<std::string>{"e.g.this is 3.5 long.", "ok"}));
}

TEST(SplitSentences, UnicodeWhitespaceSeparates) {
    // U+00A0 no-break space and U+3000 ideographic space
    EXPECT_EQ(split_sentences("One.\xC2\xA0Two.\xE3\x80\x80Three"),
              (std::vector<std::string>{"One.", "Two.", "Three"}));
}

TEST(SplitSentences, ConcatenationKeepsNonWhitespace) {
    const std::string text = "  First one!  Second?? third part.\nFourth ";
    std::string joined;
    for (const auto& s : split_sentences(text)) joined += s;
    EXPECT_EQ(strip_ws(joined), strip_ws(text));
}

TEST(SplitSentences, IdempotentOnJoin) {
    const std::string text = "Alpha beta. Gamma! Delta? epsilon";
    const auto once = split_sentences(text);
    std::string joined;
    for (const auto& s : once) joined += s + " ";
    EXPECT_EQ(split_sentences(joined), once);
}

TEST(SplitWords, LowercaseAndPunctuation) {
    EXPECT_EQ(split_words("Good food."), (std::vector<std::string>{"good", "food", "."}));
    EXPECT_TRUE(split_words("").empty());
    EXPECT_EQ(split_words("Don't stop"), (std::vector<std::string>{"don't", "stop"}));
    EXPECT_EQ(split_words("(Wow)!"), (std::vector<std::string>{"(", "wow", ")", "!"}));
}

TEST(Tokenize, OutOfVocabularyIsUnk) {
    Vocabulary vocab;
    const auto good = vocab.add("good");
    const auto tokens = tokenize("Good grief", vocab);
    ASSERT_EQ(tokens.size(), 2u);
    EXPECT_EQ(tokens[0].id, good);
    EXPECT_EQ(tokens[1].id, kUnkId);
    EXPECT_EQ(surfaces(tokens), (std::vector<std::string>{"good", "grief"}));
    for (const auto& t : tokens) EXPECT_FALSE(t.is_pad);
}

TEST(Vocabulary, ReservedIds) {
    Vocabulary vocab;
    EXPECT_EQ(vocab.id_of(kPadSurface), kPadId);
    EXPECT_EQ(vocab.id_of(kUnkSurface), kUnkId);
    EXPECT_EQ(vocab.add("x"), 2u);
    EXPECT_EQ(vocab.add("x"), 2u);
    EXPECT_EQ(vocab.size(), 3u);
}

TEST(Vocabulary, SaveLoadRoundTrip) {
    TempDir dir("vocab");
    Vocabulary vocab;
    for (const auto* w : {"alpha", "beta", "don't", "."}) vocab.add(w);
    vocab.save(dir / "vocab.tsv");
    const auto loaded = Vocabulary::load(dir / "vocab.tsv");
    ASSERT_EQ(loaded.size(), vocab.size());
    for (TokenId i = 0; i < vocab.size(); ++i) EXPECT_EQ(loaded.surface(i), vocab.surface(i));
}

TEST(PadTruncate, ShortInputIsPadded) {
    const auto s = pad_truncate(word_tokens(2), 4);
    ASSERT_EQ(s.tokens.size(), 4u);
    EXPECT_EQ(s.raw_len, 2u);
    EXPECT_EQ(s.tokens[0].surface, "w0");
    EXPECT_EQ(s.tokens[1].surface, "w1");
    EXPECT_EQ(s.tokens[2], Token::pad());
    EXPECT_EQ(s.tokens[3], Token::pad());
}

TEST(PadTruncate, LongInputKeepsPrefix) {
    const auto s = pad_truncate(word_tokens(5), 4);
    ASSERT_EQ(s.tokens.size(), 4u);
    EXPECT_EQ(s.raw_len, 4u);
    EXPECT_EQ(surfaces(s.tokens), (std::vector<std::string>{"w0", "w1", "w2", "w3"}));
}

TEST(PadTruncate, EmptyInput) {
    const auto s = pad_truncate({}, 3);
    EXPECT_EQ(s.raw_len, 0u);
    EXPECT_EQ(s.tokens, std::vector<Token>(3, Token::pad()));
}

TEST(PadTruncate, ZeroLengthRejected) { EXPECT_THROW(pad_truncate(word_tokens(1), 0), UsageError); }

TEST(TruncateDocument, Cases) {
    Document doc;
    doc.topic = 2;
    doc.sentiment = 1;
    doc.sentences.resize(50, pad_truncate(word_tokens(1), 3));
    const auto cut = truncate_document(doc, 40);
    EXPECT_EQ(cut.sentences.size(), 40u);
    EXPECT_EQ(cut.topic, 2);
    EXPECT_EQ(cut.sentiment, 1);

    doc.sentences.resize(3);
    EXPECT_EQ(truncate_document(doc, 40), doc);
    doc.sentences.resize(1);
    EXPECT_EQ(truncate_document(doc, 1), doc);
    EXPECT_THROW(truncate_document(doc, 0), UsageError);
}

TEST(LabelMap, LexicographicIdsAndUnknown) {
    LabelMap map({"zeta", "alpha", "mid", "alpha"});
    EXPECT_EQ(map.size(), 3u);
    EXPECT_EQ(map.id_of("alpha"), 0);
    EXPECT_EQ(map.id_of("mid"), 1);
    EXPECT_EQ(map.id_of("zeta"), 2);
    EXPECT_THROW(map.id_of("other"), DataError);

    TempDir dir("labels");
    map.save(dir / "labels.tsv");
    const auto loaded = LabelMap::load(dir / "labels.tsv");
    ASSERT_EQ(loaded.size(), 3u);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(loaded.label(i), map.label(i));
}

TEST(Jsonl, RoundTrip) {
    TempDir dir("jsonl");
    std::vector<RawDocument> docs = {
        {"a", "Good food. Bad service!", "food", "negative"},
        {"b", "No labels here", std::nullopt, std::nullopt},
        {"c", "Quote \" and unicode \xC3\xA9.", "travel", std::nullopt},
    };
    write_jsonl(dir / "c.jsonl", docs);
    EXPECT_EQ(read_jsonl(dir / "c.jsonl"), docs);
}

TEST(Jsonl, MalformedLineNamesLineNumber) {
    TempDir dir("jsonl_bad");
    {
        std::ofstream out(dir / "bad.jsonl");
        out << "{\"text\": \"fine\"}\n\n{\"text\": \"broken\"\n";
    }
    try {
        read_jsonl(dir / "bad.jsonl");
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.jsonl:3"), std::string::npos) << e.what();
    }
}

TEST(Jsonl, MissingTextRejected) {
    TempDir dir("jsonl_notext");
    {
        std::ofstream out(dir / "x.jsonl");
        out << "{\"topic\": \"a\"}\n";
    }
    EXPECT_THROW(read_jsonl(dir / "x.jsonl"), DataError);
}

TEST(EncodeDocument, UnknownLabelRejected) {
    const LabelMap topics({"food"});
    const LabelMap sentiments({"negative", "positive"});
    Vocabulary vocab;
    const RawDocument raw{"x", "Some text.", "sports", "positive"};
    EXPECT_THROW(encode_document(raw, vocab, topics, sentiments, GridShape{}), DataError);
}

TEST(EncodeDocument, GeometryInvariants) {
    const auto corpus = generate_synthetic(small_spec());
    const auto vocab = build_vocabulary(corpus.docs);
    const auto topics = build_topic_labels(corpus.docs);
    const auto sentiments = build_sentiment_labels(corpus.docs);
    const GridShape grid{6, 3};
    auto raws = corpus.docs;
    raws.push_back({"empty", "   ", std::nullopt, std::nullopt});
    for (const auto& doc : encode_documents(raws, vocab, topics, sentiments, grid)) {
        ASSERT_GE(doc.sentences.size(), 1u);
        ASSERT_LE(doc.sentences.size(), grid.max_sentences);
        for (const auto& s : doc.sentences) {
            ASSERT_EQ(s.tokens.size(), grid.sentence_len);
            for (std::size_t j = 0; j < s.tokens.size(); ++j) EXPECT_EQ(s.tokens[j].is_pad, j >= s.raw_len);
        }
    }
}

TEST(BuildVocabulary, FirstAppearanceOrder) {
    const std::vector<RawDocument> docs = {{"1", "b a. c", {}, {}}, {"2", "a d", {}, {}}};
    const auto vocab = build_vocabulary(docs);
    ASSERT_EQ(vocab.size(), 7u);
    EXPECT_EQ(vocab.surface(2), "b");
    EXPECT_EQ(vocab.surface(3), "a");
    EXPECT_EQ(vocab.surface(4), ".");
    EXPECT_EQ(vocab.surface(5), "c");
    EXPECT_EQ(vocab.surface(6), "d");
}

TEST(StratifiedSplit, CountsPerCellAndOrder) {
    const auto corpus = generate_synthetic(small_spec());
    const auto split = stratified_split(corpus.docs, 0.25, 5);
    EXPECT_EQ(split.kept.size() + split.holdout.size(), corpus.docs.size());
    std::map<std::pair<std::string, std::string>, int> held;
    for (const auto& d : split.holdout) ++held[{*d.topic, *d.sentiment}];
    EXPECT_EQ(held.size(), 10u);
    for (const auto& [cell, n] : held) EXPECT_EQ(n, 3);  // round(0.25 * 12)

    // relative order preserved
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < corpus.docs.size(); ++i) pos[corpus.docs[i].id] = i;
    for (const auto* side : {&split.kept, &split.holdout}) {
        for (std::size_t i = 1; i < side->size(); ++i) EXPECT_LT(pos[(*side)[i - 1].id], pos[(*side)[i].id]);
    }
    EXPECT_EQ(stratified_split(corpus.docs, 0.25, 5).holdout, split.holdout);
}

TEST(Synthetic, DeterministicGivenSpec) {
    CorpusSpec spec;
    spec.docs_per_cell = 200;
    spec.seed = 7;
    const auto a = generate_synthetic(spec);
    const auto b = generate_synthetic(spec);
    EXPECT_EQ(a.docs, b.docs);
    EXPECT_EQ(a.vectors, b.vectors);
    spec.seed = 8;
    EXPECT_NE(generate_synthetic(spec).docs, a.docs);
}

TEST(Synthetic, BalancedCellsAndDisjointVocabularies) {
    const auto spec = small_spec();
    const auto corpus = generate_synthetic(spec);
    EXPECT_EQ(corpus.docs.size(), spec.num_topics * spec.num_sentiments * spec.docs_per_cell);
    std::map<std::pair<std::string, std::string>, std::size_t> cells;
    for (const auto& d : corpus.docs) ++cells[{*d.topic, *d.sentiment}];
    EXPECT_EQ(cells.size(), spec.num_topics * spec.num_sentiments);
    for (const auto& [cell, n] : cells) EXPECT_EQ(n, spec.docs_per_cell);

    std::set<std::string> seen;
    std::size_t total = 0;
    for (const auto& words : corpus.topic_words) {
        seen.insert(words.begin(), words.end());
        total += words.size();
    }
    for (const auto& words : corpus.sentiment_words) {
        seen.insert(words.begin(), words.end());
        total += words.size();
    }
    EXPECT_EQ(seen.size(), total);
}

TEST(Synthetic, TopicRecoverableByMajorityVote) {
    const auto corpus = generate_synthetic(small_spec(11));
    std::map<std::string, std::size_t> topic_of;
    for (std::size_t t = 0; t < corpus.topic_words.size(); ++t) {
        for (const auto& w : corpus.topic_words[t]) topic_of[w] = t;
    }
    for (const auto& doc : corpus.docs) {
        std::vector<std::size_t> votes(corpus.topic_words.size(), 0);
        for (const auto& s : split_sentences(doc.text)) {
            for (const auto& w : split_words(s)) {
                if (auto it = topic_of.find(w); it != topic_of.end()) ++votes[it->second];
            }
        }
        const auto best = std::max_element(votes.begin(), votes.end()) - votes.begin();
        EXPECT_EQ(corpus.topic_names[static_cast<std::size_t>(best)], *doc.topic) << doc.id;
    }
}

TEST(Synthetic, SentimentWordInEverySentence) {
    const auto corpus = generate_synthetic(small_spec(12));
    for (const auto& doc : corpus.docs) {
        const auto s_idx = std::find(corpus.sentiment_names.begin(), corpus.sentiment_names.end(), *doc.sentiment) -
                           corpus.sentiment_names.begin();
        const auto& lexicon = corpus.sentiment_words[static_cast<std::size_t>(s_idx)];
        for (const auto& s : split_sentences(doc.text)) {
            const auto words = split_words(s);
            EXPECT_TRUE(std::any_of(words.begin(), words.end(), [&](const std::string& w) {
                return std::find(lexicon.begin(), lexicon.end(), w) != lexicon.end();
            })) << doc.id << ": " << s;
        }
    }
}

TEST(Synthetic, NoiseFreeWordsComeFromOwnTopic) {
    auto spec = small_spec(13);
    spec.mix_noise = 0.0;
    const auto corpus = generate_synthetic(spec);
    for (const auto& doc : corpus.docs) {
        const auto t = static_cast<std::size_t>(
            std::find(corpus.topic_names.begin(), corpus.topic_names.end(), *doc.topic) - corpus.topic_names.begin());
        const auto s = static_cast<std::size_t>(
            std::find(corpus.sentiment_names.begin(), corpus.sentiment_names.end(), *doc.sentiment) -
            corpus.sentiment_names.begin());
        std::set<std::string> allowed(corpus.topic_words[t].begin(), corpus.topic_words[t].end());
        allowed.insert(corpus.sentiment_words[s].begin(), corpus.sentiment_words[s].end());
        allowed.insert(corpus.function_words.begin(), corpus.function_words.end());
        allowed.insert(".");
        for (const auto& sentence : split_sentences(doc.text)) {
            for (const auto& w : split_words(sentence)) EXPECT_TRUE(allowed.count(w)) << doc.id << ": " << w;
        }
    }
}

TEST(Synthetic, NoiseShareBounded) {
    const auto spec = small_spec(14);
    const auto corpus = generate_synthetic(spec);
    std::map<std::string, std::size_t> topic_of;
    for (std::size_t t = 0; t < corpus.topic_words.size(); ++t) {
        for (const auto& w : corpus.topic_words[t]) topic_of[w] = t;
    }
    for (const auto& doc : corpus.docs) {
        const auto t = static_cast<std::size_t>(
            std::find(corpus.topic_names.begin(), corpus.topic_names.end(), *doc.topic) - corpus.topic_names.begin());
        std::size_t own = 0, other = 0;
        for (const auto& s : split_sentences(doc.text)) {
            for (const auto& w : split_words(s)) {
                if (auto it = topic_of.find(w); it != topic_of.end()) (it->second == t ? own : other)++;
            }
        }
        EXPECT_GE(static_cast<double>(own), (1.0 - spec.mix_noise) * static_cast<double>(own + other)) << doc.id;
    }
}

TEST(Synthetic, RejectsBadSpecs) {
    CorpusSpec spec;
    spec.topic_vocab_size = 0;
    EXPECT_THROW(generate_synthetic(spec), UsageError);
    spec = CorpusSpec{};
    spec.sentiment_lexicon_size = 0;
    EXPECT_THROW(generate_synthetic(spec), UsageError);
    spec = CorpusSpec{};
    spec.mix_noise = 1.5;
    EXPECT_THROW(generate_synthetic(spec), UsageError);
}
