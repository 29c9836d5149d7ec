#include "stgcd/rw_kernel.hpp"

#include <stdexcept>
#include <string>

namespace stgcd {

HiddenGraph HiddenGraph::init(size_t nodes, size_t embed_dim, Rng& rng) {
    HiddenGraph h;
    h.free_adjacency = uniform_init({nodes, nodes}, -1.0, 1.0, rng);
    h.node_embeddings = glorot(nodes, embed_dim, rng);
    return h;
}

HiddenGraph HiddenGraph::with_fixed_adjacency(Tensor adjacency, Tensor embeddings) {
    HiddenGraph h;
    h.fixed_adjacency = std::move(adjacency);
    h.node_embeddings = std::move(embeddings);
    h.fixed = true;
    return h;
}

Tensor HiddenGraph::effective_adjacency() const {
    if (fixed) return fixed_adjacency;
    Tensor sym = scalar_mul(add(free_adjacency, transpose(free_adjacency)), 0.5);
    Tensor off_diag = sub(Tensor::full({sym.rows(), sym.rows()}, 1.0),
                          Tensor::identity(sym.rows()));
    return mul(sigmoid(sym), off_diag);
}

HiddenGraphGroup HiddenGraphGroup::init(size_t count, size_t nodes, size_t d_model,
                                        size_t embed_dim, Rng& rng) {
    HiddenGraphGroup g;
    g.graphs.reserve(count);
    for (size_t i = 0; i < count; ++i)
        g.graphs.push_back(HiddenGraph::init(nodes, embed_dim, rng));
    g.projection = glorot(d_model, embed_dim, rng);
    return g;
}

HiddenGraphBank HiddenGraphBank::init(const ModelConfig& cfg, Rng& rng) {
    HiddenGraphBank b;
    b.global = HiddenGraphGroup::init(cfg.global_graphs, cfg.global_nodes, cfg.d_model,
                                      cfg.rw_embed_dim, rng);
    b.local = HiddenGraphGroup::init(cfg.local_graphs, cfg.local_nodes, cfg.d_model,
                                     cfg.rw_embed_dim, rng);
    b.walk_steps = cfg.walk_steps;
    return b;
}

void HiddenGraphBank::collect_parameters(NamedTensors& out) const {
    auto add_group = [&out](const HiddenGraphGroup& g, const std::string& prefix) {
        for (size_t k = 0; k < g.graphs.size(); ++k) {
            out.emplace_back(prefix + "." + std::to_string(k) + "/adj",
                             g.graphs[k].free_adjacency);
            out.emplace_back(prefix + "." + std::to_string(k) + "/emb",
                             g.graphs[k].node_embeddings);
        }
        out.emplace_back(prefix + ".proj", g.projection);
    };
    add_group(global, "rw.global");
    add_group(local, "rw.local");
}

namespace {

void check_kernel_inputs(const Tensor& adjacency, const Tensor& features,
                         const HiddenGraph& hidden) {
    if (adjacency.rank() != 2 || adjacency.rows() != adjacency.cols())
        throw std::invalid_argument("walk_kernel: adjacency not square: " +
                                    adjacency.shape_str());
    if (features.rank() != 2 || features.rows() != adjacency.rows())
        throw std::invalid_argument("walk_kernel: features/adjacency row mismatch");
    if (features.cols() != hidden.embed_dim())
        throw std::invalid_argument(
            "walk_kernel: feature width " + std::to_string(features.cols()) +
            " does not match hidden embedding width " +
            std::to_string(hidden.embed_dim()));
}

}  // namespace

Tensor walk_kernel(const Tensor& adjacency, const Tensor& features,
                   const HiddenGraph& hidden, size_t p) {
    check_kernel_inputs(adjacency, features, hidden);
    Tensor a_hidden = hidden.effective_adjacency();
    // s over product vertices (i,j), row-major, as the n x m matrix S = Y K^T.
    Tensor s0 = matmul(features, transpose(hidden.node_embeddings));
    Tensor sp = s0;
    for (size_t step = 0; step < p; ++step)
        sp = matmul(matmul(adjacency, sp), transpose(a_hidden));
    return sum_all(mul(s0, sp));
}

Tensor walk_kernel_dense(const Tensor& adjacency, const Tensor& features,
                         const HiddenGraph& hidden, size_t p) {
    check_kernel_inputs(adjacency, features, hidden);
    Tensor a_hidden = hidden.effective_adjacency();
    size_t n = adjacency.rows(), m = hidden.node_count();
    Tensor s = reshape(matmul(features, transpose(hidden.node_embeddings)), {n * m, 1});
    Tensor a_cross_p = matrix_power(kron(adjacency, a_hidden), p);
    return reshape(matmul(transpose(s), matmul(a_cross_p, s)), {1});
}

double brute_force_walk_count(const std::vector<double>& a, size_t n,
                              const std::vector<double>& a_hidden, size_t m,
                              const std::vector<double>& endpoint_products, size_t p) {
    if (n > 6 || m > 6 || p > 4)
        throw std::invalid_argument("brute_force_walk_count: enumeration bounds exceeded");
    if (a.size() != n * n || a_hidden.size() != m * m ||
        endpoint_products.size() != n * m)
        throw std::invalid_argument("brute_force_walk_count: size mismatch");
    for (double v : a)
        if (v != 0.0 && v != 1.0)
            throw std::invalid_argument("brute_force_walk_count: adjacency not binary");
    for (double v : a_hidden)
        if (v != 0.0 && v != 1.0)
            throw std::invalid_argument("brute_force_walk_count: adjacency not binary");

    // Enumerate every length-p walk in each graph, keep (start, end) pairs.
    auto walks = [p](const std::vector<double>& adj,
                     size_t nodes) -> std::vector<std::pair<size_t, size_t>> {
        std::vector<std::pair<size_t, size_t>> out;
        std::vector<size_t> walk;
        auto extend = [&](auto&& self, size_t last) -> void {
            if (walk.size() == p + 1) {
                out.emplace_back(walk.front(), walk.back());
                return;
            }
            for (size_t next = 0; next < nodes; ++next)
                if (adj[last * nodes + next] == 1.0) {
                    walk.push_back(next);
                    self(self, next);
                    walk.pop_back();
                }
        };
        for (size_t start = 0; start < nodes; ++start) {
            walk = {start};
            extend(extend, start);
        }
        return out;
    };

    auto g_walks = walks(a, n);
    auto h_walks = walks(a_hidden, m);
    double total = 0.0;
    for (const auto& [gs, ge] : g_walks)
        for (const auto& [hs, he] : h_walks)
            total += endpoint_products[gs * m + hs] * endpoint_products[ge * m + he];
    return total;
}

Tensor graph_representation(const Tensor& adjacency, const Tensor& features,
                            const HiddenGraphBank& bank) {
    if (adjacency.rows() == 0)
        throw std::invalid_argument("graph_representation: empty graph");
    Tensor rep;
    bool first = true;
    auto run_group = [&](const HiddenGraphGroup& group) {
        Tensor projected = matmul(features, group.projection);
        for (const auto& hidden : group.graphs) {
            // One sweep over p reuses the propagated S matrices.
            Tensor a_hidden = hidden.effective_adjacency();
            Tensor s0 = matmul(projected, transpose(hidden.node_embeddings));
            Tensor sp = s0;
            for (size_t p = 0; p <= bank.walk_steps; ++p) {
                if (p > 0) sp = matmul(matmul(adjacency, sp), transpose(a_hidden));
                Tensor entry = sum_all(mul(s0, sp));
                rep = first ? entry : concat_cols(rep, entry);
                first = false;
            }
        }
    };
    run_group(bank.global);
    run_group(bank.local);
    return rep;
}

}  // namespace stgcd
