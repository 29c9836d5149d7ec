#pragma once

#include <vector>

#include "stgcd/checkpoint.hpp"
#include "stgcd/config.hpp"
#include "stgcd/tensor.hpp"

namespace stgcd {

// Small trainable graph acting as a learnable kernel. The effective adjacency
// is sigmoid of symmetrized free parameters with a zero diagonal, keeping
// edge weights in (0,1). Tests may pin a fixed (e.g. binary) adjacency.
struct HiddenGraph {
    Tensor free_adjacency;   // n x n trainable parameters
    Tensor node_embeddings;  // n x d
    Tensor fixed_adjacency;  // non-empty only in fixed mode
    bool fixed = false;

    static HiddenGraph init(size_t nodes, size_t embed_dim, Rng& rng);
    static HiddenGraph with_fixed_adjacency(Tensor adjacency, Tensor embeddings);
    size_t node_count() const { return node_embeddings.rows(); }
    size_t embed_dim() const { return node_embeddings.cols(); }
    Tensor effective_adjacency() const;
};

// Two groups of hidden graphs: larger ones for global structure, smaller ones
// for local structure, with a shared per-group feature projection from model
// width down to the embedding width.
struct HiddenGraphGroup {
    std::vector<HiddenGraph> graphs;
    Tensor projection;  // d_model x embed_dim

    static HiddenGraphGroup init(size_t count, size_t nodes, size_t d_model,
                                 size_t embed_dim, Rng& rng);
};

struct HiddenGraphBank {
    HiddenGraphGroup global;
    HiddenGraphGroup local;
    size_t walk_steps = 1;  // step set {0..walk_steps}

    static HiddenGraphBank init(const ModelConfig& cfg, Rng& rng);
    size_t representation_width() const {
        return (global.graphs.size() + local.graphs.size()) * (walk_steps + 1);
    }
    void collect_parameters(NamedTensors& out) const;
};

// P-step random-walk kernel between a live graph (adjacency + node features in
// embedding width) and a hidden graph. Never materializes the Kronecker
// product; evaluates (A_x)^p s through the mixed-product identity.
Tensor walk_kernel(const Tensor& adjacency, const Tensor& features,
                   const HiddenGraph& hidden, size_t p);

// Dense reference: materializes A (x) A^h and takes the explicit matrix power.
Tensor walk_kernel_dense(const Tensor& adjacency, const Tensor& features,
                         const HiddenGraph& hidden, size_t p);

// Literal walk-pair enumeration for binary graphs (the oracle).
double brute_force_walk_count(const std::vector<double>& a, size_t n,
                              const std::vector<double>& a_hidden, size_t m,
                              const std::vector<double>& endpoint_products, size_t p);

// Row-major flattened K x (P+1) entries for the global group followed by the
// local group: entry (k,p) = walk_kernel(G, H_k, p) on projected features.
Tensor graph_representation(const Tensor& adjacency, const Tensor& features,
                            const HiddenGraphBank& bank);

}  // namespace stgcd
