#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "stgcd/metrics.hpp"
#include "stgcd/training.hpp"

using namespace stgcd;

namespace {

ModelConfig train_cfg(size_t vocab) {
    ModelConfig cfg = ModelConfig::desk();
    cfg.d_model = 8;
    cfg.d_emb = 8;
    cfg.enc_layers = 1;
    cfg.enc_heads = 2;
    cfg.enc_ffn = 16;
    cfg.dec_blocks = 2;
    cfg.vocab_size = vocab;
    cfg.max_len = 12;
    cfg.rw_embed_dim = 4;
    cfg.global_graphs = 2;
    cfg.global_nodes = 3;
    cfg.local_graphs = 2;
    cfg.local_nodes = 2;
    return cfg;
}

}  // namespace

TEST_CASE("smooth_l1 closed form") {
    auto [v0, d0] = smooth_l1(0.0);
    CHECK(v0 == 0.0);
    CHECK(d0 == 0.0);
    auto [v1, d1] = smooth_l1(0.5);
    CHECK(v1 == doctest::Approx(0.125));
    CHECK(d1 == doctest::Approx(0.5));
    auto [v2, d2] = smooth_l1(2.0);
    CHECK(v2 == doctest::Approx(1.5));
    CHECK(d2 == 1.0);
    auto [v3, d3] = smooth_l1(-2.0);
    CHECK(v3 == doctest::Approx(1.5));
    CHECK(d3 == -1.0);
    // continuity at the branch point
    auto [vin, din] = smooth_l1(1.0);
    auto [vout, dout] = smooth_l1(1.0 + 1e-12);
    CHECK(vin == doctest::Approx(0.5));
    CHECK(std::abs(vin - vout) < 1e-10);
    CHECK(din == doctest::Approx(1.0));
    CHECK(dout == 1.0);
}

TEST_CASE("joint_loss") {
    SUBCASE("perfect adjacency gives a pure CE loss") {
        auto gold = SyntacticGraph::from_heads({kRootHead, 0});
        std::vector<Tensor> logits = {Tensor::from({5, 0, 0}, {3}),
                                      Tensor::from({0, 5, 0}, {3})};
        std::vector<Tensor> adj = {
            Tensor::from(gold_prefix_adjacency(gold, 1), {1, 1}),
            Tensor::from(gold_prefix_adjacency(gold, 2), {2, 2})};
        Tensor with = joint_loss(logits, {0, 1}, adj, gold);
        Tensor without = joint_loss(logits, {0, 1}, {}, gold);
        CHECK(with.value() == doctest::Approx(without.value()).epsilon(1e-14));
    }
    SUBCASE("uniform logits over two classes cost ln 2") {
        auto gold = SyntacticGraph::from_heads({kRootHead});
        std::vector<Tensor> logits = {Tensor::from({0.0, 0.0}, {2})};
        Tensor loss = joint_loss(logits, {0}, {}, gold);
        CHECK(loss.value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("matches a naive two-term recomputation") {
        Rng rng(11);
        auto gold = SyntacticGraph::from_heads({kRootHead, 0, 1});
        std::vector<Tensor> logits, adj;
        std::vector<int> targets = {1, 2, 0};
        for (size_t t = 1; t <= 3; ++t) {
            logits.push_back(uniform_init({4}, -1, 1, rng, false));
            adj.push_back(uniform_init({t, t}, 0, 1, rng, false));
        }
        Tensor loss = joint_loss(logits, targets, adj, gold);

        double expect = 0.0;
        for (size_t i = 0; i < 3; ++i) {
            double mx = -1e300, z = 0.0;
            for (double v : logits[i].data()) mx = std::max(mx, v);
            for (double v : logits[i].data()) z += std::exp(v - mx);
            expect += mx + std::log(z) - logits[i].at(targets[i]);
        }
        expect /= 3.0;
        for (size_t t = 1; t <= 3; ++t) {
            auto star = gold_prefix_adjacency(gold, t);
            for (size_t i = 0; i < t * t; ++i)
                expect += smooth_l1(adj[t - 1].at(i) - star[i]).first;
        }
        CHECK(std::abs(loss.value() - expect) < 1e-12);
    }
    SUBCASE("length mismatch rejected") {
        auto gold = SyntacticGraph::from_heads({kRootHead});
        std::vector<Tensor> logits = {Tensor::from({0.0, 0.0}, {2})};
        CHECK_THROWS_AS(joint_loss(logits, {0, 1}, {}, gold), std::invalid_argument);
    }
}

TEST_CASE("forward_loss and graph teacher forcing") {
    auto corpus = generate_corpus(ToyGrammar::standard(), 6, 12, 42);
    Vocab vocab = Vocab::build(corpus);
    ModelConfig cfg = train_cfg(vocab.size());
    Rng rng(12);
    Model m = Model::init(cfg, rng);
    TrainConfig tc;

    SUBCASE("loss is finite and positive") {
        LossParts parts = forward_loss(m, corpus[0], vocab, tc);
        CHECK(std::isfinite(parts.total.value()));
        CHECK(parts.total.value() > 0.0);
        CHECK(parts.ce > 0.0);
        CHECK(parts.graph >= 0.0);
    }
    SUBCASE("free generation differs from gold-forced graph recursion") {
        LossParts free_run = forward_loss(m, corpus[0], vocab, tc);
        TrainConfig forced = tc;
        forced.teacher_force_graphs = true;
        LossParts forced_run = forward_loss(m, corpus[0], vocab, forced);
        CHECK(std::abs(free_run.total.value() - forced_run.total.value()) > 1e-10);
    }
    SUBCASE("gradients match finite differences on a full instance") {
        const CorpusExample& ex = corpus[1];
        NamedTensors named = m.parameters();
        std::vector<Tensor> params;
        for (auto& [n, t] : named) params.push_back(t);

        Tensor loss = forward_loss(m, ex, vocab, tc).total;
        backward(loss);
        std::vector<std::vector<double>> analytic;
        for (auto& t : params) {
            if (!t.has_grad()) t.zero_grad();
            analytic.push_back(t.grad());
        }
        auto eval = [&]() { return forward_loss(m, ex, vocab, tc).total.value(); };
        FdReport rep = finite_difference_check_params(eval, params, analytic, 1e-5);
        CHECK(rep.fraction_below(1e-4) >= 0.99);
        CHECK(rep.max_rel_err < 1e-3);
    }
}

TEST_CASE("training loop") {
    auto corpus = generate_corpus(ToyGrammar::standard(), 6, 12, 7);
    Vocab vocab = Vocab::build(corpus);
    ModelConfig cfg = train_cfg(vocab.size());

    SUBCASE("zero learning rate leaves parameters untouched") {
        Rng rng(13);
        Model m = Model::init(cfg, rng);
        NamedTensors before = m.parameters();
        std::vector<std::vector<double>> snap;
        for (auto& [n, t] : before) snap.push_back(t.data());
        TrainConfig tc;
        tc.lr = 0.0;
        tc.epochs = 1;
        tc.batch_size = 3;
        train(m, corpus, vocab, tc, "");
        NamedTensors after = m.parameters();
        for (size_t k = 0; k < after.size(); ++k)
            CHECK(after[k].second.data() == snap[k]);
    }
    SUBCASE("a few epochs reduce the loss") {
        Rng rng(14);
        Model m = Model::init(cfg, rng);
        TrainConfig tc;
        tc.lr = 3e-3;
        tc.epochs = 5;
        tc.batch_size = 3;
        tc.seed = 14;
        auto history = train(m, corpus, vocab, tc, "");
        REQUIRE(history.size() == 5);
        double first = history.front().ce + history.front().graph;
        double last = history.back().ce + history.back().graph;
        CHECK(last < first);
        for (const auto& em : history) CHECK(em.seconds >= 0.0);
    }
    SUBCASE("identical runs give byte-identical checkpoints") {
        namespace fs = std::filesystem;
        auto dir1 = fs::temp_directory_path() / "stgcd_train_a";
        auto dir2 = fs::temp_directory_path() / "stgcd_train_b";
        fs::create_directories(dir1);
        fs::create_directories(dir2);
        TrainConfig tc;
        tc.lr = 1e-3;
        tc.epochs = 2;
        tc.batch_size = 3;
        tc.seed = 21;
        for (auto [dir, seed] : {std::pair{dir1, 0}, std::pair{dir2, 0}}) {
            Rng rng(100);
            Model m = Model::init(cfg, rng);
            train(m, corpus, vocab, tc, dir.string());
        }
        std::ifstream f1(dir1 / "epoch2.ckpt", std::ios::binary);
        std::ifstream f2(dir2 / "epoch2.ckpt", std::ios::binary);
        std::string s1((std::istreambuf_iterator<char>(f1)), {});
        std::string s2((std::istreambuf_iterator<char>(f2)), {});
        REQUIRE(!s1.empty());
        CHECK(s1 == s2);
        fs::remove_all(dir1);
        fs::remove_all(dir2);
    }
    SUBCASE("non-finite loss aborts the run") {
        Rng rng(15);
        Model m = Model::init(cfg, rng);
        m.out_b.mutable_data()[0] = std::numeric_limits<double>::quiet_NaN();
        TrainConfig tc;
        tc.epochs = 1;
        tc.batch_size = 2;
        CHECK_THROWS_AS(train(m, corpus, vocab, tc, ""), std::runtime_error);
    }
    SUBCASE("paper-scale hyperparameters are representable") {
        TrainConfig tc = TrainConfig::paper();
        CHECK(tc.batch_size == 96);
        CHECK(tc.beam_size == 12);
        CHECK(tc.lr == doctest::Approx(1e-4));
        CHECK(tc.beta1 == doctest::Approx(0.9));
        CHECK(ModelConfig::paper().vocab_size == 30000);
    }
}
