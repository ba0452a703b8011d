#include <gtest/gtest.h>

#include <fstream>

#include "semimage/embeddings.hpp"
#include "semimage/error.hpp"
#include "support.hpp"

using namespace semimage;
using semimage::testing::TempDir;

namespace {

struct Toy {
    Vocabulary vocab;
    EmbeddingTable table;
};

// 2-dim table: a=(1,2) b=(3,-1) c=(-2,5); "zz" is in the file but not the vocabulary.
Toy toy() {
    Toy t;
    for (const auto* w : {"a", "b", "c", "d"}) t.vocab.add(w);
    t.table = EmbeddingTable::from_rows({{"a", {1.f, 2.f}}, {"b", {3.f, -1.f}}, {"c", {-2.f, 5.f}}, {"zz", {2.f, 2.f}}},
                                        t.vocab);
    return t;
}

Sentence sentence_of(const std::string& text, const Vocabulary& vocab, std::size_t len) {
    return pad_truncate(tokenize(text, vocab), len);
}

}  // namespace

TEST(EmbeddingTable, PadIsZero) {
    const auto t = toy();
    for (float x : t.table.lookup(Token::pad())) EXPECT_EQ(x, 0.0f);
    for (float x : t.table.lookup(kPadId)) EXPECT_EQ(x, 0.0f);
}

TEST(EmbeddingTable, KnownIdIsBitExact) {
    const auto t = toy();
    const auto v = t.table.lookup(t.vocab.id_of("b"));
    EXPECT_EQ(v[0], 3.0f);
    EXPECT_EQ(v[1], -1.0f);
}

TEST(EmbeddingTable, UnknownIsUnkVectorMeanOfFile) {
    const auto t = toy();
    // mean over all four file rows: ((1+3-2+2)/4, (2-1+5+2)/4)
    const auto unk = t.table.unk_vector();
    EXPECT_FLOAT_EQ(unk[0], 1.0f);
    EXPECT_FLOAT_EQ(unk[1], 2.0f);
    const auto oov = t.table.lookup(Token{kUnkId, "qq", false});
    EXPECT_EQ(std::vector<float>(oov.begin(), oov.end()), std::vector<float>(unk.begin(), unk.end()));
    // "d" is in the vocabulary but has no vector
    EXPECT_FALSE(t.table.has_vector(t.vocab.id_of("d")));
    const auto d = t.table.lookup(t.vocab.id_of("d"));
    EXPECT_EQ(d[0], unk[0]);
}

TEST(EmbeddingTable, FileRoundTripIsExact) {
    TempDir dir("vectors");
    Vocabulary vocab;
    vocab.add("x");
    vocab.add("y");
    const std::vector<std::pair<std::string, std::vector<float>>> rows = {
        {"x", {0.1f, -3.3333333f, 1e-20f}}, {"y", {123456.78f, 0.0f, -0.5f}}};
    EmbeddingTable::save(dir / "v.txt", rows);
    const auto table = EmbeddingTable::load(dir / "v.txt", vocab);
    EXPECT_EQ(table.dim(), 3u);
    for (const auto& [w, v] : rows) {
        const auto got = table.lookup(vocab.id_of(w));
        EXPECT_EQ(std::vector<float>(got.begin(), got.end()), v);
    }
}

TEST(EmbeddingTable, BadFilesRejected) {
    TempDir dir("vectors_bad");
    Vocabulary vocab;
    {
        std::ofstream out(dir / "ragged.txt");
        out << "a 1 2\nb 1 2 3\n";
    }
    EXPECT_THROW(EmbeddingTable::load(dir / "ragged.txt", vocab), DataError);
    {
        std::ofstream out(dir / "nan.txt");
        out << "a 1 x\n";
    }
    EXPECT_THROW(EmbeddingTable::load(dir / "nan.txt", vocab), DataError);
    EXPECT_THROW(EmbeddingTable::load(dir / "missing.txt", vocab), DataError);
}

TEST(SentenceEncoder, TwoIdenticalWords) {
    const auto t = toy();
    const auto v = SentenceEncoder::mean_pool().encode(t.table, sentence_of("a a", t.vocab, 5), "d", 0);
    EXPECT_EQ(v, (std::vector<double>{1.0, 2.0}));
}

TEST(SentenceEncoder, AllPadIsZero) {
    const auto t = toy();
    const auto v = SentenceEncoder::mean_pool().encode(t.table, sentence_of("", t.vocab, 4), "d", 0);
    EXPECT_EQ(v, (std::vector<double>{0.0, 0.0}));
}

TEST(SentenceEncoder, ThreeDistinctWordsHandMean) {
    const auto t = toy();
    const auto v = SentenceEncoder::mean_pool().encode(t.table, sentence_of("a b c", t.vocab, 6), "d", 0);
    EXPECT_DOUBLE_EQ(v[0], 2.0 / 3.0);  // (1+3-2)/3
    EXPECT_DOUBLE_EQ(v[1], 2.0);        // (2-1+5)/3
}

TEST(SentenceEncoder, InvariantToPadCount) {
    const auto t = toy();
    const auto enc = SentenceEncoder::mean_pool();
    EXPECT_EQ(enc.encode(t.table, sentence_of("a b c", t.vocab, 3), "d", 0),
              enc.encode(t.table, sentence_of("a b c", t.vocab, 30), "d", 0));
}

TEST(SentenceEncoder, PrecomputedVerbatimAndMissingKey) {
    const auto t = toy();
    TempDir dir("sentvec");
    {
        std::ofstream out(dir / "s.jsonl");
        out << R"({"doc_id": "doc1", "sent": 0, "vec": [0.25, -1.5]})" << '\n';
        out << R"({"doc_id": "doc1", "sent": 1, "vec": [3.0, 4.0]})" << '\n';
    }
    const auto enc = SentenceEncoder::load_precomputed(dir / "s.jsonl");
    EXPECT_EQ(enc.mode(), SentenceEncoderMode::precomputed);
    const auto s = sentence_of("a", t.vocab, 3);
    EXPECT_EQ(enc.encode(t.table, s, "doc1", 1), (std::vector<double>{3.0, 4.0}));
    try {
        enc.encode(t.table, s, "doc2", 7);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("doc2"), std::string::npos);
        EXPECT_NE(msg.find('7'), std::string::npos);
    }
}

TEST(CosineSim, Cases) {
    const std::vector<double> a{1.0, 2.0, -3.0};
    const std::vector<double> neg{-1.0, -2.0, 3.0};
    EXPECT_DOUBLE_EQ(cosine_sim(a, a), 1.0);
    EXPECT_DOUBLE_EQ(cosine_sim(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 2.0}), 0.0);
    EXPECT_DOUBLE_EQ(cosine_sim(a, neg), -1.0);
    EXPECT_EQ(cosine_sim(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 1.0}), 1.0);
    EXPECT_THROW(cosine_sim(a, std::vector<double>{1.0}), DataError);
}

TEST(CosineSim, SymmetricScaleInvariantBounded) {
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const auto a = semimage::testing::random_vector(rng, 7);
        const auto b = semimage::testing::random_vector(rng, 7);
        const double l = uniform(rng, 0.01, 100.0), m = uniform(rng, 0.01, 100.0);
        auto la = a, mb = b;
        for (auto& x : la) x *= l;
        for (auto& x : mb) x *= m;
        const double c = cosine_sim(a, b);
        EXPECT_EQ(c, cosine_sim(b, a));
        EXPECT_NEAR(c, cosine_sim(la, mb), 1e-12);
        EXPECT_LE(std::abs(c), 1.0);
    }
}
