#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "stgcd/metrics.hpp"

using namespace stgcd;

namespace {

// Position map from source to target indices: verb moves to the end, the
// object phrase shifts left by one.
std::vector<size_t> alignment(const CorpusExample& ex) {
    size_t verb_pos = 0;
    for (size_t i = 0; i < ex.src_heads.size(); ++i)
        if (ex.src_heads[i] == kRootHead) verb_pos = i;
    std::vector<size_t> map(ex.src.size());
    for (size_t i = 0; i < ex.src.size(); ++i) {
        if (i < verb_pos)
            map[i] = i;
        else if (i == verb_pos)
            map[i] = ex.src.size() - 1;
        else
            map[i] = i - 1;
    }
    return map;
}

}  // namespace

TEST_CASE("generate_corpus") {
    ToyGrammar g = ToyGrammar::standard();

    SUBCASE("every sentence has exactly one root on both sides, the verb") {
        auto corpus = generate_corpus(g, 50, 12, 3);
        for (const auto& ex : corpus) {
            CHECK(std::count(ex.src_heads.begin(), ex.src_heads.end(), kRootHead) == 1);
            CHECK(std::count(ex.tgt_heads.begin(), ex.tgt_heads.end(), kRootHead) == 1);
            size_t verb_src = 0;
            for (size_t i = 0; i < ex.src_heads.size(); ++i)
                if (ex.src_heads[i] == kRootHead) verb_src = i;
            CHECK(std::find(g.verbs.begin(), g.verbs.end(), ex.src[verb_src]) !=
                  g.verbs.end());
            CHECK(ex.tgt_heads.back() == kRootHead);  // verb-final target
        }
    }
    SUBCASE("target order is the dictionary translation with the verb last") {
        auto corpus = generate_corpus(g, 200, 12, 5);
        bool saw_plain = false;
        for (const auto& ex : corpus) {
            auto map = alignment(ex);
            REQUIRE(ex.tgt.size() == ex.src.size());
            for (size_t i = 0; i < ex.src.size(); ++i)
                CHECK(ex.tgt[map[i]] == g.translate(ex.src[i]));
            if (ex.src.size() == 5) saw_plain = true;
        }
        CHECK(saw_plain);  // the adjective-free shape occurs
    }
    SUBCASE("source and target arc sets are isomorphic under the alignment") {
        auto corpus = generate_corpus(g, 100, 12, 9);
        for (const auto& ex : corpus) {
            auto map = alignment(ex);
            auto src_g = SyntacticGraph::from_heads(ex.src_heads);
            auto tgt_g = SyntacticGraph::from_heads(ex.tgt_heads);
            for (size_t i = 0; i < ex.src.size(); ++i)
                for (size_t j = 0; j < ex.src.size(); ++j)
                    CHECK(src_g.adj(i, j) == tgt_g.adj(map[i], map[j]));
        }
    }
    SUBCASE("same seed gives an identical corpus") {
        auto c1 = generate_corpus(g, 30, 12, 77);
        auto c2 = generate_corpus(g, 30, 12, 77);
        REQUIRE(c1.size() == c2.size());
        for (size_t i = 0; i < c1.size(); ++i) {
            CHECK(c1[i].src == c2[i].src);
            CHECK(c1[i].tgt == c2[i].tgt);
            CHECK(c1[i].src_heads == c2[i].src_heads);
            CHECK(c1[i].tgt_heads == c2[i].tgt_heads);
        }
    }
    SUBCASE("gold-vs-gold UAS is 1 over a large sample") {
        auto corpus = generate_corpus(g, 2000, 12, 1);
        double total = 0.0;
        for (const auto& ex : corpus) total += uas(ex.tgt_heads, ex.tgt_heads);
        CHECK(total / corpus.size() == 1.0);
    }
    SUBCASE("too-small max_len rejected") {
        CHECK_THROWS_AS(generate_corpus(g, 1, 6, 1), std::invalid_argument);
        CHECK_THROWS_AS(generate_corpus(g, 0, 12, 1), std::invalid_argument);
    }
    SUBCASE("held-out split is the final tenth") {
        auto corpus = generate_corpus(g, 40, 12, 2);
        std::vector<CorpusExample> train_set, held;
        split_corpus(corpus, train_set, held);
        CHECK(train_set.size() == 36);
        CHECK(held.size() == 4);
        CHECK(held.back().src == corpus.back().src);
    }
}

TEST_CASE("vocab") {
    auto corpus = generate_corpus(ToyGrammar::standard(), 100, 12, 4);
    Vocab v = Vocab::build(corpus);
    CHECK(v.word(0) == "<bos>");
    CHECK(v.word(1) == "<eos>");
    CHECK(v.size() > 10);
    for (const auto& ex : corpus) {
        auto back = v.words(v.ids(ex.tgt));
        CHECK(back == ex.tgt);
    }
    CHECK_THROWS_AS(v.id("zzz-not-a-word"), std::invalid_argument);
    CHECK_THROWS_AS(v.word(-1), std::invalid_argument);
}

TEST_CASE("uas") {
    std::vector<int> gold = {kRootHead, 0, 1, 2, 3, 4, 5, 6, 7, 8};
    CHECK(uas(gold, gold) == 1.0);
    std::vector<int> half = gold;
    for (size_t i = 5; i < 10; ++i) half[i] = 0;
    CHECK(uas(half, gold) == doctest::Approx(0.5));
    std::vector<int> wrong(10);
    for (int i = 0; i < 10; ++i) wrong[i] = i;  // self-loops never match gold
    CHECK(uas(wrong, gold) == 0.0);
    CHECK_THROWS_AS(uas({0, 1}, {0}), std::invalid_argument);

    SUBCASE("no shuffle exceeds 1") {
        std::mt19937_64 rng(5);
        std::vector<int> pred = gold;
        for (int k = 0; k < 20; ++k) {
            std::shuffle(pred.begin(), pred.end(), rng);
            CHECK(uas(pred, gold) <= 1.0);
        }
    }
}

TEST_CASE("bleu4") {
    using Sent = std::vector<std::string>;
    SUBCASE("identical corpus scores 1") {
        std::vector<Sent> h = {{"a", "b", "c", "d", "e"}};
        CHECK(bleu4(h, h) == doctest::Approx(1.0));
    }
    SUBCASE("no 4-gram overlap without smoothing scores 0") {
        std::vector<Sent> h = {{"x", "y", "z", "w"}};
        std::vector<Sent> r = {{"a", "b", "c", "d"}};
        CHECK(bleu4(h, r) == 0.0);
    }
    SUBCASE("hand case matches the independent n-gram computation") {
        std::vector<Sent> h = {{"a", "b", "c", "d", "e"}};
        std::vector<Sent> r = {{"a", "b", "c", "d", "f"}};
        // precisions 4/5, 3/4, 2/3, 1/2; equal lengths so no brevity penalty
        double expect = std::pow((4.0 / 5.0) * (3.0 / 4.0) * (2.0 / 3.0) * (1.0 / 2.0),
                                 0.25);
        CHECK(std::abs(bleu4(h, r) - expect) < 1e-9);
    }
    SUBCASE("proper prefix scores below 1") {
        std::vector<Sent> r = {{"a", "b", "c", "d", "e", "f"}};
        std::vector<Sent> h = {{"a", "b", "c", "d", "e"}};
        double s = bleu4(h, r);
        CHECK(s < 1.0);
        CHECK(s > 0.0);
    }
    SUBCASE("smoothing rescues zero counts") {
        std::vector<Sent> h = {{"a", "b"}};
        std::vector<Sent> r = {{"a", "b"}};
        CHECK(bleu4(h, r) == 0.0);             // no 3- or 4-grams at all
        CHECK(bleu4(h, r, true) > 0.0);
    }
    SUBCASE("size mismatch rejected") {
        std::vector<Sent> h = {{"a"}};
        CHECK_THROWS_AS(bleu4(h, {}), std::invalid_argument);
    }
}

TEST_CASE("evaluate") {
    auto corpus = generate_corpus(ToyGrammar::standard(), 8, 12, 33);
    Vocab vocab = Vocab::build(corpus);
    ModelConfig cfg = ModelConfig::desk();
    cfg.d_model = 8;
    cfg.d_emb = 8;
    cfg.enc_layers = 1;
    cfg.enc_ffn = 16;
    cfg.dec_blocks = 2;
    cfg.vocab_size = vocab.size();
    cfg.max_len = 12;
    cfg.rw_embed_dim = 4;
    cfg.global_graphs = 2;
    cfg.global_nodes = 3;
    cfg.local_graphs = 2;
    cfg.local_nodes = 2;
    Rng rng(9);
    Model m = Model::init(cfg, rng);
    TrainConfig flags;

    SUBCASE("untrained model yields bounded metrics and full records") {
        EvalReport rep = evaluate(m, corpus, vocab, 1, flags);
        CHECK(rep.exact_match >= 0.0);
        CHECK(rep.exact_match <= 1.0);
        CHECK(rep.bleu >= 0.0);
        CHECK(rep.bleu <= 1.0);
        CHECK(rep.uas >= 0.0);
        CHECK(rep.uas <= 1.0);
        CHECK(rep.records.size() == corpus.size());
        CHECK(rep.to_json().find("exact_match") != std::string::npos);
    }
    SUBCASE("forced-reference mode pins the tokens and scores only graphs") {
        EvalReport rep = evaluate(m, corpus, vocab, 1, flags, true);
        CHECK(rep.exact_match == 1.0);
        for (size_t i = 0; i < corpus.size(); ++i) {
            CHECK(rep.records[i].tokens == corpus[i].tgt);
            CHECK(rep.records[i].heads.size() == corpus[i].tgt.size());
        }
    }
    SUBCASE("empty corpus rejected") {
        CHECK_THROWS_AS(evaluate(m, {}, vocab, 1, flags), std::invalid_argument);
    }
}
