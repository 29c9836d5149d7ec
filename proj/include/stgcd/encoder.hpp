#pragma once

#include <vector>

#include "stgcd/checkpoint.hpp"
#include "stgcd/config.hpp"
#include "stgcd/graph.hpp"
#include "stgcd/rw_kernel.hpp"
#include "stgcd/tensor.hpp"

namespace stgcd {

struct EncoderLayerParams {
    std::vector<Tensor> wq, wk, wv;  // one d_model x d_head matrix per head
    Tensor wo;                       // d_model x d_model
    Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;
    Tensor ff_w1, ff_b1, ff_w2, ff_b2;
};

struct EncoderParams {
    Tensor token_embed;  // vocab x d_model
    std::vector<EncoderLayerParams> layers;
    size_t heads = 1;
    size_t max_len = 0;

    static EncoderParams init(const ModelConfig& cfg, Rng& rng);
    size_t d_model() const { return token_embed.cols(); }
    void collect_parameters(NamedTensors& out) const;
};

struct EncoderOutput {
    Tensor x;       // U x d_model token representations
    Tensor sog;     // pooled d_model vector
    Tensor a_src;   // U x U symmetric binary source adjacency
    Tensor rw;      // source walk representation (empty row when disabled)
};

// Standard post-norm multi-head self-attention stack with sinusoidal
// positional encodings.
Tensor transformer_encode(const std::vector<int>& tokens, const EncoderParams& params);

Tensor build_source_graph(const std::vector<int>& heads);

// Mean over the token axis.
Tensor sog_pool(const Tensor& x);

Tensor source_rw_reps(const Tensor& x, const Tensor& a_src, const HiddenGraphBank& bank);

EncoderOutput encode(const std::vector<int>& tokens, const std::vector<int>& heads,
                     const EncoderParams& params, const HiddenGraphBank& bank,
                     bool with_walks);

}  // namespace stgcd
