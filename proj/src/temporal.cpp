#include "stgcd/temporal.hpp"

#include <stdexcept>

#include "stgcd/spatial.hpp"

namespace stgcd {

TemporalBlockParams TemporalBlockParams::init(size_t d, Rng& rng) {
    TemporalBlockParams p;
    p.pre_w = glorot(d, d, rng);
    p.k1 = uniform_init({2, d}, -0.5, 0.5, rng);
    p.k2 = uniform_init({2, d}, -0.5, 0.5, rng);
    p.gcn_w = glorot(d, d, rng);
    return p;
}

void TemporalBlockParams::collect_parameters(const std::string& prefix,
                                             NamedTensors& out) const {
    out.emplace_back(prefix + ".pre", pre_w);
    out.emplace_back(prefix + ".k1", k1);
    out.emplace_back(prefix + ".k2", k2);
    out.emplace_back(prefix + ".gcn", gcn_w);
}

Tensor causal_unit(const Tensor& p, const TemporalBlockParams& params) {
    Tensor c = relu(dilated_causal_conv(p, params.k1, 1));
    c = relu(dilated_causal_conv(c, params.k2, 2));
    return add(c, p);
}

namespace {

Tensor block_topleft(const Tensor& a, size_t k) {
    return transpose(slice_rows(transpose(slice_rows(a, 0, k)), 0, k));
}

}  // namespace

Tensor temporal_block(const Tensor& y_seq, const Tensor& a_obs, const Tensor& sog,
                      const TemporalBlockParams& params) {
    size_t t_len = y_seq.rows(), d = y_seq.cols();
    if (a_obs.rows() != t_len + 1)
        throw std::invalid_argument("temporal_block: adjacency covers " +
                                    std::to_string(a_obs.rows()) +
                                    " nodes, expected " + std::to_string(t_len + 1));
    if (sog.size() != d)
        throw std::invalid_argument("temporal_block: sog width mismatch");

    Tensor history = causal_unit(matmul(y_seq, params.pre_w), params);
    Tensor sog_row = reshape(sog, {1, d});
    Tensor out;
    for (size_t t = 0; t < t_len; ++t) {
        Tensor feats = concat_rows(sog_row, slice_rows(history, 0, t + 1));
        Tensor g = dynamic_gcn_forward(feats, block_topleft(a_obs, t + 2), params.gcn_w);
        Tensor last = slice_rows(g, t + 1, t + 2);
        out = (t == 0) ? last : concat_rows(out, last);
    }
    return out;
}

}  // namespace stgcd
