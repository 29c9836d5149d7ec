#pragma once

#include <string>

#include "stgcd/checkpoint.hpp"
#include "stgcd/tensor.hpp"

namespace stgcd {

struct TemporalBlockParams {
    Tensor pre_w;   // size-1 channel mixing, bias-free
    Tensor k1, k2;  // depthwise causal kernels, dilations 1 and 2
    Tensor gcn_w;

    static TemporalBlockParams init(size_t d, Rng& rng);
    void collect_parameters(const std::string& prefix, NamedTensors& out) const;
};

// Stacked dilated causal convolutions with a residual connection.
Tensor causal_unit(const Tensor& p, const TemporalBlockParams& params);

// Full temporal block: channel mixing, the causal unit, then a per-step
// prefix GCN over the observed adjacency. Node 0 of a_obs is the encoder
// node carrying sog; row t of y_seq is node t+1. Output row t only sees
// input rows <= t and the leading (t+2)-block of a_obs.
Tensor temporal_block(const Tensor& y_seq, const Tensor& a_obs, const Tensor& sog,
                      const TemporalBlockParams& params);

}  // namespace stgcd
