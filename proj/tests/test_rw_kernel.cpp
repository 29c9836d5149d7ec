#include "doctest.h"

#include <cmath>

#include "stgcd/rw_kernel.hpp"

using namespace stgcd;

namespace {

Tensor unit_features(size_t n) { return Tensor::full({n, 1}, 1.0); }

HiddenGraph binary_hidden(const std::vector<double>& adj, size_t m) {
    return HiddenGraph::with_fixed_adjacency(Tensor::from(adj, {m, m}),
                                             unit_features(m));
}

const std::vector<double> kPath2 = {0, 1, 1, 0};
const std::vector<double> kPath3 = {0, 1, 0, 1, 0, 1, 0, 1, 0};
const std::vector<double> kTriangle = {0, 1, 1, 1, 0, 1, 1, 1, 0};

}  // namespace

TEST_CASE("walk_kernel trivial cases") {
    SUBCASE("p=0 on 1-node unit-feature graphs is s^T s = 1") {
        Tensor a = Tensor::zeros({1, 1});
        auto h = binary_hidden({0.0}, 1);
        CHECK(walk_kernel(a, unit_features(1), h, 0).value() == doctest::Approx(1.0));
    }
    SUBCASE("p=1 with no edges anywhere is 0") {
        Tensor a = Tensor::zeros({1, 1});
        auto h = binary_hidden({0.0}, 1);
        CHECK(walk_kernel(a, unit_features(1), h, 1).value() == doctest::Approx(0.0));
    }
    SUBCASE("two 2-node paths at p=1 give 4") {
        Tensor a = Tensor::from(kPath2, {2, 2});
        auto h = binary_hidden(kPath2, 2);
        CHECK(walk_kernel(a, unit_features(2), h, 1).value() == doctest::Approx(4.0));
    }
    SUBCASE("feature width mismatch rejected") {
        Tensor a = Tensor::zeros({2, 2});
        auto h = binary_hidden(kPath2, 2);  // embed width 1
        CHECK_THROWS_AS(walk_kernel(a, Tensor::zeros({2, 3}), h, 1),
                        std::invalid_argument);
    }
}

TEST_CASE("brute-force walk counting") {
    SUBCASE("p=0 sums squared endpoint products") {
        std::vector<double> s = {2, 3};  // 1 graph node x 2 hidden nodes
        CHECK(brute_force_walk_count({0.0}, 1, kPath2, 2, s, 0) ==
              doctest::Approx(4.0 + 9.0));
    }
    SUBCASE("path2 vs path3 at p=1: 2 walks x 4 walks") {
        std::vector<double> s(2 * 3, 1.0);
        CHECK(brute_force_walk_count(kPath2, 2, kPath3, 3, s, 1) == doctest::Approx(8.0));
    }
    SUBCASE("triangle vs triangle at p=2: 12 directed walks each") {
        std::vector<double> s(9, 1.0);
        CHECK(brute_force_walk_count(kTriangle, 3, kTriangle, 3, s, 2) ==
              doctest::Approx(144.0));
    }
    SUBCASE("bounds enforced") {
        std::vector<double> a(49, 0.0), s(7, 0.0);
        CHECK_THROWS_AS(brute_force_walk_count(a, 7, {0.0}, 1, s, 1),
                        std::invalid_argument);
    }
}

TEST_CASE("exhaustive kernel-oracle equivalence on small binary graphs") {
    // All symmetric binary graphs: <=4 live nodes x <=3 hidden nodes, p in 0..3.
    for (size_t n = 1; n <= 4; ++n) {
        size_t n_pairs = n * (n - 1) / 2;
        for (size_t bits = 0; bits < (1u << n_pairs); ++bits) {
            std::vector<double> a(n * n, 0.0);
            size_t b = 0;
            for (size_t i = 0; i < n; ++i)
                for (size_t j = i + 1; j < n; ++j, ++b)
                    if (bits & (1u << b)) a[i * n + j] = a[j * n + i] = 1.0;
            for (size_t m = 1; m <= 3; ++m) {
                size_t m_pairs = m * (m - 1) / 2;
                for (size_t hb = 0; hb < (1u << m_pairs); ++hb) {
                    std::vector<double> ah(m * m, 0.0);
                    size_t c = 0;
                    for (size_t i = 0; i < m; ++i)
                        for (size_t j = i + 1; j < m; ++j, ++c)
                            if (hb & (1u << c)) ah[i * m + j] = ah[j * m + i] = 1.0;
                    auto hidden = binary_hidden(ah, m);
                    Tensor at = Tensor::from(a, {n, n});
                    std::vector<double> s(n * m, 1.0);
                    for (size_t p = 0; p <= 3; ++p) {
                        double fast = walk_kernel(at, unit_features(n), hidden, p).value();
                        double oracle = brute_force_walk_count(a, n, ah, m, s, p);
                        CHECK(std::abs(fast - oracle) <= 1e-9);
                    }
                }
            }
        }
    }
}

TEST_CASE("fast path equals dense Kronecker reference on random real inputs") {
    Rng rng(77);
    for (int trial = 0; trial < 25; ++trial) {
        size_t n = 2 + trial % 3, m = 2 + trial % 2, d = 3;
        Tensor a = uniform_init({n, n}, 0.0, 1.0, rng, false);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < i; ++j) {
                double v = 0.5 * (a.at(i, j) + a.at(j, i));
                a.mutable_data()[i * n + j] = a.mutable_data()[j * n + i] = v;
            }
        Tensor y = uniform_init({n, d}, -1.0, 1.0, rng, false);
        HiddenGraph h = HiddenGraph::init(m, d, rng);
        for (size_t p = 0; p <= 3; ++p) {
            double fast = walk_kernel(a, y, h, p).value();
            double dense = walk_kernel_dense(a, y, h, p).value();
            CHECK(std::abs(fast - dense) <= 1e-10 * std::max(1.0, std::abs(dense)));
        }
    }
}

TEST_CASE("kernel gradients pass the fd oracle for all four inputs") {
    Rng rng(13);
    size_t n = 3, m = 3, d = 2;
    Tensor y = uniform_init({n, d}, -1, 1, rng, false);
    HiddenGraph h = HiddenGraph::init(m, d, rng);
    Tensor a_sym = uniform_init({n, n}, -1, 1, rng, false);

    SUBCASE("w.r.t. live adjacency") {
        auto f = [&](const Tensor& x) {
            Tensor a = sigmoid(scalar_mul(add(x, transpose(x)), 0.5));
            return walk_kernel(a, y, h, 2);
        };
        CHECK(finite_difference_check(f, a_sym, 1e-5).max_rel_err < 1e-6);
    }
    SUBCASE("w.r.t. live features") {
        Tensor a = sigmoid(a_sym).detach();
        auto f = [&](const Tensor& x) { return walk_kernel(a, x, h, 2); };
        CHECK(finite_difference_check(f, y, 1e-5).max_rel_err < 1e-6);
    }
    SUBCASE("w.r.t. hidden adjacency parameters") {
        Tensor a = sigmoid(a_sym).detach();
        auto f = [&](const Tensor& x) {
            HiddenGraph hh = h;
            hh.free_adjacency = x;
            return walk_kernel(a, y, hh, 2);
        };
        CHECK(finite_difference_check(f, h.free_adjacency.detach(), 1e-5).max_rel_err <
              1e-6);
    }
    SUBCASE("w.r.t. hidden embeddings") {
        Tensor a = sigmoid(a_sym).detach();
        auto f = [&](const Tensor& x) {
            HiddenGraph hh = h;
            hh.node_embeddings = x;
            return walk_kernel(a, y, hh, 2);
        };
        CHECK(finite_difference_check(f, h.node_embeddings.detach(), 1e-5).max_rel_err <
              1e-6);
    }
}

TEST_CASE("kernel invariant under consistent node relabeling") {
    Rng rng(21);
    size_t n = 4, d = 2;
    Tensor a = uniform_init({n, n}, 0, 1, rng, false);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < i; ++j) {
            double v = 0.5 * (a.at(i, j) + a.at(j, i));
            a.mutable_data()[i * n + j] = a.mutable_data()[j * n + i] = v;
        }
    Tensor y = uniform_init({n, d}, -1, 1, rng, false);
    HiddenGraph h = HiddenGraph::init(3, d, rng);
    std::vector<size_t> perm = {2, 0, 3, 1};
    Tensor ap = Tensor::zeros({n, n}), yp = Tensor::zeros({n, d});
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j)
            ap.mutable_data()[perm[i] * n + perm[j]] = a.at(i, j);
        for (size_t c = 0; c < d; ++c) yp.mutable_data()[perm[i] * d + c] = y.at(i, c);
    }
    for (size_t p = 0; p <= 3; ++p)
        CHECK(walk_kernel(a, y, h, p).value() ==
              doctest::Approx(walk_kernel(ap, yp, h, p).value()).epsilon(1e-10));
}

TEST_CASE("graph_representation shape and entrywise agreement") {
    Rng rng(31);
    ModelConfig cfg = ModelConfig::desk();
    cfg.d_model = 8;
    cfg.rw_embed_dim = 4;
    HiddenGraphBank bank = HiddenGraphBank::init(cfg, rng);
    Tensor a = Tensor::from({0, 1, 0, 0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 0, 1, 0}, {4, 4});
    Tensor y = uniform_init({4, cfg.d_model}, -1, 1, rng, false);
    Tensor rep = graph_representation(a, y, bank);
    REQUIRE(rep.size() == bank.representation_width());

    size_t idx = 0;
    for (const auto* group : {&bank.global, &bank.local}) {
        Tensor projected = matmul(y, group->projection);
        for (const auto& hidden : group->graphs)
            for (size_t p = 0; p <= bank.walk_steps; ++p, ++idx)
                CHECK(rep.at(idx) ==
                      doctest::Approx(walk_kernel(a, projected, hidden, p).value())
                          .epsilon(1e-12));
    }
}

TEST_CASE("paper preset representation width is 24") {
    ModelConfig cfg = ModelConfig::paper();
    CHECK((cfg.global_graphs + cfg.local_graphs) * (cfg.walk_steps + 1) == 24);
}

TEST_CASE("effective adjacency is symmetric, zero-diagonal, in (0,1)") {
    Rng rng(41);
    HiddenGraph h = HiddenGraph::init(5, 3, rng);
    Tensor a = h.effective_adjacency();
    for (size_t i = 0; i < 5; ++i) {
        CHECK(a.at(i, i) == 0.0);
        for (size_t j = 0; j < 5; ++j) {
            CHECK(a.at(i, j) == doctest::Approx(a.at(j, i)));
            if (i != j) {
                CHECK(a.at(i, j) > 0.0);
                CHECK(a.at(i, j) < 1.0);
            }
        }
    }
}
