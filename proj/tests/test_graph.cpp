#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "stgcd/graph.hpp"

using namespace stgcd;

TEST_CASE("normalize_adjacency reference cases") {
    SUBCASE("single node") {
        auto r = normalize_adjacency({0.0}, 1);
        CHECK(r[0] == doctest::Approx(1.0));
    }
    SUBCASE("two isolated nodes become identity") {
        auto r = normalize_adjacency({0, 0, 0, 0}, 2);
        CHECK(r[0] == doctest::Approx(1.0));
        CHECK(r[1] == doctest::Approx(0.0));
        CHECK(r[2] == doctest::Approx(0.0));
        CHECK(r[3] == doctest::Approx(1.0));
    }
    SUBCASE("two-node path") {
        auto r = normalize_adjacency({0, 1, 1, 0}, 2);
        for (double v : r) CHECK(v == doctest::Approx(0.5));
    }
}

TEST_CASE("differentiable normalization matches the dense reference") {
    Rng rng(9);
    Tensor a = uniform_init({5, 5}, 0.0, 1.0, rng, false);
    // symmetrize
    for (size_t i = 0; i < 5; ++i)
        for (size_t j = 0; j < i; ++j) {
            double v = 0.5 * (a.at(i, j) + a.at(j, i));
            a.mutable_data()[i * 5 + j] = v;
            a.mutable_data()[j * 5 + i] = v;
        }
    Tensor norm = normalize_adjacency_t(a);
    auto ref = normalize_adjacency(a.data(), 5);
    for (size_t i = 0; i < 25; ++i) CHECK(std::abs(norm.at(i) - ref[i]) < 1e-12);
    // symmetry preserved
    for (size_t i = 0; i < 5; ++i)
        for (size_t j = 0; j < 5; ++j)
            CHECK(std::abs(norm.at(i, j) - norm.at(j, i)) < 1e-12);
}

TEST_CASE("normalization gradients pass the fd oracle") {
    Rng rng(10);
    auto f = [](const Tensor& x) {
        Tensor pos = sigmoid(x);  // keep entries nonnegative
        return sum_all(tanh_t(normalize_adjacency_t(pos)));
    };
    FdReport rep = finite_difference_check(f, uniform_init({4, 4}, -1, 1, rng, false), 1e-5);
    CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("gold_prefix_adjacency") {
    SUBCASE("t=1 is a lone self-connection") {
        auto g = SyntacticGraph::from_heads({kRootHead, 0, 1});
        auto a = gold_prefix_adjacency(g, 1);
        REQUIRE(a.size() == 1);
        CHECK(a[0] == doctest::Approx(1.0));
    }
    SUBCASE("chain at t=2 is all ones") {
        auto g = SyntacticGraph::from_heads({kRootHead, 0, 1});
        auto a = gold_prefix_adjacency(g, 2);
        for (double v : a) CHECK(v == doctest::Approx(1.0));
    }
    SUBCASE("fan-out at t=3") {
        auto g = SyntacticGraph::from_heads({kRootHead, 0, 0});
        auto a = gold_prefix_adjacency(g, 3);
        auto at = [&](size_t i, size_t j) { return a[i * 3 + j]; };
        CHECK(at(0, 0) == 1.0);
        CHECK(at(1, 1) == 1.0);
        CHECK(at(2, 2) == 1.0);
        CHECK(at(0, 1) == 1.0);
        CHECK(at(1, 0) == 1.0);
        CHECK(at(0, 2) == 1.0);
        CHECK(at(2, 0) == 1.0);
        CHECK(at(1, 2) == 0.0);
        CHECK(at(2, 1) == 0.0);
    }
    SUBCASE("out-of-range step rejected") {
        auto g = SyntacticGraph::from_heads({kRootHead});
        CHECK_THROWS_AS(gold_prefix_adjacency(g, 2), std::invalid_argument);
        CHECK_THROWS_AS(gold_prefix_adjacency(g, 0), std::invalid_argument);
    }
    SUBCASE("full prefix equals the arc matrix off-diagonal") {
        auto g = SyntacticGraph::from_heads({kRootHead, 0, 1, 1});
        auto a = gold_prefix_adjacency(g, 4);
        for (size_t i = 0; i < 4; ++i)
            for (size_t j = 0; j < 4; ++j)
                if (i != j) CHECK(a[i * 4 + j] == g.adj(i, j));
    }
}

TEST_CASE("extract_heads") {
    SUBCASE("single token is the root") {
        auto h = extract_heads({1.0}, 1);
        CHECK(h == std::vector<int>{kRootHead});
    }
    SUBCASE("argmax picks the strongest predecessor") {
        // token 2 row: scores 0.9 toward 0, 0.1 toward 1
        std::vector<double> s = {1, 0, 0, 0.3, 1, 0, 0.9, 0.1, 1};
        auto h = extract_heads(s, 3);
        CHECK(h[2] == 0);
    }
    SUBCASE("ties break toward the smaller index") {
        std::vector<double> s = {1, 0, 0, 0.3, 1, 0, 0.5, 0.5, 1};
        auto h = extract_heads(s, 3);
        CHECK(h[2] == 0);
    }
    SUBCASE("sub-threshold rows fall back to the root sentinel") {
        std::vector<double> s = {1, 0, 0, 0.49, 1, 0, 0.2, 0.3, 1};
        auto h = extract_heads(s, 3);
        CHECK(h[1] == kRootHead);
        CHECK(h[2] == kRootHead);
    }
    SUBCASE("gold adjacency recovers gold heads for predecessor arcs") {
        auto g = SyntacticGraph::from_heads({kRootHead, 0, 1, 2});
        auto a = gold_prefix_adjacency(g, 4);
        auto h = extract_heads(a, 4);
        CHECK(h == g.heads);
    }
}

TEST_CASE("gold graph validation") {
    auto g = SyntacticGraph::from_heads({kRootHead, 0, 1});
    CHECK_NOTHROW(g.validate_gold());
    SUBCASE("two roots rejected") {
        auto bad = SyntacticGraph::from_heads({kRootHead, kRootHead, 1});
        CHECK_THROWS_AS(bad.validate_gold(), std::invalid_argument);
    }
    SUBCASE("self-loop head rejected") {
        CHECK_THROWS_AS(SyntacticGraph::from_heads({kRootHead, 1}),
                        std::invalid_argument);
    }
}

TEST_CASE("corpus file round-trip") {
    auto path = std::filesystem::temp_directory_path() / "stgcd_corpus_test.jsonl";
    SUBCASE("empty file yields empty corpus") {
        std::ofstream(path.string()).close();
        CHECK(read_corpus(path.string()).empty());
    }
    SUBCASE("write then read is the identity") {
        std::vector<CorpusExample> ex = {
            {{"the", "dog", "runs"}, {"le", "chien", "court"},
             {1, 2, kRootHead}, {1, 2, kRootHead}}};
        write_corpus(path.string(), ex);
        auto back = read_corpus(path.string());
        REQUIRE(back.size() == 1);
        CHECK(back[0].src == ex[0].src);
        CHECK(back[0].tgt == ex[0].tgt);
        CHECK(back[0].src_heads == ex[0].src_heads);
        CHECK(back[0].tgt_heads == ex[0].tgt_heads);
        // serialization fixpoint: writing the parsed corpus reproduces the bytes
        auto path2 = std::filesystem::temp_directory_path() / "stgcd_corpus_test2.jsonl";
        write_corpus(path2.string(), back);
        std::ifstream f1(path.string()), f2(path2.string());
        std::string s1((std::istreambuf_iterator<char>(f1)), {});
        std::string s2((std::istreambuf_iterator<char>(f2)), {});
        CHECK(s1 == s2);
        std::filesystem::remove(path2);
    }
    SUBCASE("malformed line reported with its number") {
        std::ofstream f(path.string());
        f << R"({"src":["a"],"tgt":["b"],"src_heads":[-1],"tgt_heads":[-1]})" << "\n";
        f << "not json\n";
        f.close();
        CHECK_THROWS_WITH_AS(read_corpus(path.string()), doctest::Contains("line 2"),
                             std::runtime_error);
    }
    SUBCASE("head index out of range rejected") {
        std::ofstream f(path.string());
        f << R"({"src":["a"],"tgt":["b"],"src_heads":[5],"tgt_heads":[-1]})" << "\n";
        f.close();
        CHECK_THROWS_AS(read_corpus(path.string()), std::runtime_error);
    }
    std::filesystem::remove(path);
}
