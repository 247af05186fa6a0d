#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "tatt/corpus.hpp"
#include "tatt/error.hpp"

using namespace tatt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("tatt_corpus_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path write(const std::string& name, const std::string& content) const {
        std::ofstream(path / name, std::ios::binary) << content;
        return path / name;
    }
};

Vocab small_vocab(std::vector<Corpus>& corpora) {
    corpora.push_back(make_corpus({"plane tip tip", "the plane flew", "tip the plane"}, "t1"));
    corpora.push_back(make_corpus({"the tip of the plane", "a plane"}, "t2"));
    const std::vector<TargetWordRecord> targets{{"plane", 0.5}};
    return build_vocab(corpora, targets, 1);
}

}  // namespace

TEST_CASE("load corpus") {
    TempDir d;
    const auto c = load_corpus(d.write("c.txt", "The Plane departed\n\n  \nsecond line\r\nthird\n"), "t1");
    CHECK(c.doc_count == 3);
    CHECK(c.sentences.front() == "the plane departed");
    CHECK(c.sentences[1] == "second line");
    CHECK_THROWS_AS(load_corpus(d.write("e.txt", "\n \n"), "t1"), EmptyCorpusError);
    CHECK_THROWS_AS(load_corpus(d.path / "missing.txt", "t1"), IoError);
    CHECK_THROWS_AS(load_corpus(d.write("bad.txt", "ok\n\xC3\x28\n"), "t1"), IoError);
    const auto cased = load_corpus(d.path / "c.txt", "t1", {.lowercase = false});
    CHECK(cased.sentences.front() == "The Plane departed");
}

TEST_CASE("load targets") {
    TempDir d;
    const auto t = load_targets(d.write("t.tsv", "Plane\t0.25\ntip\t1\n"));
    REQUIRE(t.size() == 2);
    CHECK(t[0].word == "plane");
    CHECK(t[0].gold_score == 0.25);
    try {
        load_targets(d.write("b.tsv", "a\t0.1\nb 0.2\n"));
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(load_targets(d.write("r.tsv", "a\t1.5\n")), ParseError);
    CHECK_THROWS_AS(load_targets(d.write("n.tsv", "a\tabc\n")), ParseError);
}

TEST_CASE("tokenize") {
    CHECK(tokenize("  the  plane, departed!") == std::vector<std::string>{"the", "plane", ",", "departed", "!"});
    CHECK(tokenize("well-known don't a_b") == std::vector<std::string>{"well-known", "don't", "a_b"});
    CHECK(tokenize("").empty());
    CHECK(contains_token("the plane, flew", "plane"));
    CHECK_FALSE(contains_token("the planes flew", "plane"));
}

TEST_CASE("build vocab") {
    const std::vector<Corpus> c1{make_corpus({"a b"}, "t1")};
    const std::vector<TargetWordRecord> tc{{"c", 0.0}};
    const Vocab v1 = build_vocab(c1, tc, 1);
    CHECK(v1.find("a"));
    CHECK(v1.find("b"));
    CHECK(v1.find("c"));

    const std::vector<Corpus> c2{make_corpus({"a a b"}, "t1")};
    CHECK_FALSE(build_vocab(c2, {}, 2).find("b"));
    const std::vector<TargetWordRecord> tb{{"b", 0.0}};
    CHECK(build_vocab(c2, tb, 2).find("b"));

    std::vector<Corpus> corpora;
    const Vocab v = small_vocab(corpora);
    CHECK(v.token(kPadId) == "[PAD]");
    CHECK(v.token(kUnkId) == "[UNK]");
    CHECK(v.token(kMaskId) == "[MASK]");
    // target first, then tip(4) the(4) ... by frequency then lexicographic
    CHECK(v.token(3) == "plane");
    CHECK(v.token(4) == "the");
    CHECK(v.token(5) == "tip");
    CHECK(v.time_token_count() == 2);
    CHECK(v.token(v.size() - 2) == "<t1>");
    CHECK(v.token(v.size() - 1) == "<t2>");
    std::vector<Corpus> again;
    CHECK(small_vocab(again) == v);
}

TEST_CASE("time vocab") {
    std::vector<Corpus> corpora;
    small_vocab(corpora);
    const TimeVocab tv = build_time_vocab(corpora);
    CHECK(tv.size() == 5);
    CHECK(tv.id("t1") == 3);
    CHECK(tv.id("t2") == 4);
    CHECK(tv.index(4) == 2);
    CHECK(tv.index(kPadTime) == 0);
    CHECK(tv.doc_counts() == std::vector<double>{3.0, 2.0});
    CHECK_THROWS_AS(tv.id("t9"), VocabError);
}

TEST_CASE("encode sequence") {
    std::vector<Corpus> corpora;
    const Vocab v = small_vocab(corpora);
    const TimeVocab tv = build_time_vocab(corpora);
    const auto s = encode_sequence(v, tv, "plane tip", "t2", AttentionMode::standard, 128);
    CHECK(s.token_ids == std::vector<std::size_t>{*v.find("plane"), *v.find("tip")});
    CHECK(s.time_ids == std::vector<std::size_t>{4, 4});
    const auto p = encode_sequence(v, tv, "plane tip", "t2", AttentionMode::prepend, 128);
    CHECK(p.token_ids == std::vector<std::size_t>{*v.find("<t2>"), *v.find("plane"), *v.find("tip")});
    CHECK(p.size() == 3);
    const auto u = encode_sequence(v, tv, "plane zebra", "t1", AttentionMode::temporal, 128);
    CHECK(u.token_ids[1] == kUnkId);
    CHECK(decode(v, u) == std::vector<std::string>{"plane", "[UNK]"});
    CHECK(decode(v, s) == std::vector<std::string>{"plane", "tip"});
    CHECK(encode_sequence(v, tv, "a b c d e f", "t1", AttentionMode::standard, 4).size() == 4);
    CHECK_THROWS_AS(encode_sequence(v, tv, "  ", "t1", AttentionMode::standard, 4), ContractError);

    const std::vector<TimedSequence> batch{s, p};
    const auto padded = pad_batch(batch);
    CHECK(padded[0].size() == 3);
    CHECK(padded[0].token_ids[2] == kPadId);
    CHECK(padded[0].time_ids[2] == kPadTime);
    CHECK(padded[1] == p);
}

TEST_CASE("targets never map to unk") {
    std::vector<Corpus> corpora{make_corpus({"rare once"}, "t1")};
    const std::vector<TargetWordRecord> targets{{"once", 1.0}};
    const Vocab v = build_vocab(corpora, targets, 5);
    const TimeVocab tv = build_time_vocab(corpora);
    const auto s = encode_sequence(v, tv, "rare once", "t1", AttentionMode::standard, 8);
    CHECK(s.token_ids[0] == kUnkId);
    CHECK(s.token_ids[1] == *v.find("once"));
}

TEST_CASE("masking extremes and replay") {
    std::vector<Corpus> corpora;
    const Vocab v = small_vocab(corpora);
    const TimeVocab tv = build_time_vocab(corpora);
    const auto s = encode_sequence(v, tv, "the plane tip of a plane", "t1", AttentionMode::prepend, 32);
    std::mt19937_64 rng(1);
    const auto none = mask_for_mlm(s, v, rng, 0.0, AttentionMode::prepend);
    CHECK(none.input == s);
    CHECK(none.positions.empty());
    const auto all = mask_for_mlm(s, v, rng, 1.0, AttentionMode::prepend);
    CHECK(all.positions == std::vector<std::size_t>{1, 2, 3, 4, 5, 6});

    // Reference draw sequence, replayed independently.
    const auto t = encode_sequence(v, tv, "the plane tip of a plane", "t1", AttentionMode::temporal, 32);
    std::mt19937_64 a(99), b(99);
    const auto got = mask_for_mlm(t, v, a, 0.5, AttentionMode::temporal);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> word(kNumSpecialTokens, v.regular_end() - 1);
    TimedSequence expect = t;
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t.token_ids[i] == kUnkId || !(unit(b) < 0.5)) {
            continue;
        }
        pos.push_back(i);
        const double r = unit(b);
        if (r < 0.8) {
            expect.token_ids[i] = kMaskId;
            expect.time_ids[i] = kMaskTime;
        } else if (r < 0.9) {
            expect.token_ids[i] = word(b);
        }
    }
    CHECK(got.positions == pos);
    CHECK(got.input == expect);
}

TEST_CASE("masking ratios") {
    std::vector<std::string> words;
    for (int i = 0; i < 2000; ++i) {
        words.push_back("w" + std::to_string(i));
    }
    const std::set<std::string> none;
    const Vocab v(words, none, 0);
    TimedSequence s;
    for (std::size_t i = 0; i < 100; ++i) {
        s.token_ids.push_back(kNumSpecialTokens + i * 7);
        s.time_ids.push_back(3);
    }
    std::mt19937_64 rng(4);
    std::size_t selected = 0, masked = 0, replaced = 0, kept = 0, draws = 0;
    while (selected < 100000) {
        const auto m = mask_for_mlm(s, v, rng, 0.15, AttentionMode::standard);
        draws += s.size();
        for (std::size_t p : m.positions) {
            ++selected;
            if (m.input.token_ids[p] == kMaskId) {
                ++masked;
            } else if (m.input.token_ids[p] != s.token_ids[p]) {
                ++replaced;
            } else {
                ++kept;
            }
        }
    }
    const double n = static_cast<double>(selected);
    CHECK(std::abs(static_cast<double>(selected) / static_cast<double>(draws) - 0.15) <= 0.01);
    CHECK(std::abs(static_cast<double>(masked) / n - 0.8) <= 0.01);
    CHECK(std::abs(static_cast<double>(replaced) / n - 0.1) <= 0.01);
    CHECK(std::abs(static_cast<double>(kept) / n - 0.1) <= 0.01);
}

TEST_CASE("sample sentences") {
    std::vector<std::string> lines;
    for (int i = 0; i < 10; ++i) {
        lines.push_back("w s" + std::to_string(i));
    }
    lines.push_back("x only");
    const Corpus c = make_corpus(lines, "t1");
    std::mt19937_64 a(3), b(3);
    const auto s1 = sample_sentences(c, "w", 5, a);
    const auto s2 = sample_sentences(c, "w", 5, b);
    CHECK(s1 == s2);
    CHECK(s1.size() == 5);
    CHECK(std::set<std::string>(s1.begin(), s1.end()).size() == 5);
    for (const auto& s : s1) {
        CHECK(contains_token(s, "w"));
    }
    std::mt19937_64 r(1);
    CHECK(sample_sentences(c, "x", 100, r) == std::vector<std::string>{"x only"});
    try {
        sample_sentences(c, "zebra", 3, r);
        FAIL("expected absent word");
    } catch (const AbsentWordError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("zebra") != std::string::npos);
        CHECK(msg.find("t1") != std::string::npos);
    }
}
