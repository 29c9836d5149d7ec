#pragma once

#include <string>

#include "stgcd/checkpoint.hpp"
#include "stgcd/tensor.hpp"

namespace stgcd {

// Column-wise GRU evolving a d_in x d_out weight matrix. The input side is the
// column-mean summarization of the previous node features mapped to d_out
// entries, injected through per-gate d_in vectors.
struct GruCellParams {
    Tensor p_z, q_z, b_z;
    Tensor p_r, q_r, b_r;
    Tensor p_w, q_w, b_w;
    Tensor sum_w, sum_b;  // summarization affine, d_in -> d_out

    static GruCellParams init(size_t d_in, size_t d_out, Rng& rng);
    void collect_parameters(const std::string& prefix, NamedTensors& out) const;
};

struct AttentionParams {
    Tensor w_att;  // d x d
    Tensor psi;    // 2d x 1, split into self and neighbor halves

    static AttentionParams init(size_t d, Rng& rng);
    void collect_parameters(const std::string& prefix, NamedTensors& out) const;
};

// Two-layer perceptron with a ReLU hidden layer and linear output.
struct MlpParams {
    Tensor w1, b1, w2, b2;

    static MlpParams init(size_t d_in, size_t hidden, size_t d_out, Rng& rng);
    void collect_parameters(const std::string& prefix, NamedTensors& out) const;
};

Tensor mlp_forward(const Tensor& x, const MlpParams& mlp);

// ReLU(norm(A) Y W) with the symmetric degree normalization of graph-model.
Tensor dynamic_gcn_forward(const Tensor& y, const Tensor& a, const Tensor& w);

Tensor gru_weight_update(const Tensor& y_prev, const Tensor& w_prev,
                         const GruCellParams& cell);

// Lower-triangular reachability (self plus earlier nodes; node 0 is the
// encoder node and is visible to everyone).
Tensor causal_mask(size_t n);

// Row-stochastic attention coefficients over the masked neighborhood.
Tensor attention_adjacency(const Tensor& y_observed, const AttentionParams& params,
                           const Tensor& mask, double leaky_slope);

// Sigmoid of a scalar affine map of A_prev + attention, symmetrized by
// transpose averaging, with the diagonal and encoder row/column pinned to 1.
Tensor refine_adjacency(const Tensor& a_prev, const Tensor& att, const Tensor& weight,
                        const Tensor& bias);

// Embeds an observed-block adjacency into an n x n matrix whose unobserved
// part keeps only the retained diagonal and encoder connections.
Tensor materialize_full_adjacency(const Tensor& a_obs, size_t n_total);

// Layer-dependent feature update: the first layer mixes in the previous token
// embedding, the last layer mixes in both walk representations, middle layers
// transform features alone. Side vectors are broadcast to every row.
Tensor layer_output_update(const Tensor& y, size_t l, size_t num_layers,
                           const Tensor& token_embedding, const Tensor& r_source,
                           const Tensor& r_target, const MlpParams& mlp);

}  // namespace stgcd
