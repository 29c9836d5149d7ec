#include "stgcd/spatial.hpp"

#include <stdexcept>

#include "stgcd/graph.hpp"

namespace stgcd {

namespace {

Tensor broadcast_rows(const Tensor& v, size_t n) {
    return outer(Tensor::full({n}, 1.0), reshape(v, {v.size()}));
}

// x * w + b with trainable scalar tensors w, b.
Tensor scalar_affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    size_t n = x.rows(), m = x.cols();
    Tensor ones_col = Tensor::full({n, 1}, 1.0);
    Tensor wv = reshape(matmul(ones_col, reshape(w, {1, 1})), {n});
    Tensor bv = reshape(matmul(ones_col, reshape(b, {1, 1})), {n});
    return add(rows_scale(x, wv), outer(bv, Tensor::full({m}, 1.0)));
}

}  // namespace

GruCellParams GruCellParams::init(size_t d_in, size_t d_out, Rng& rng) {
    GruCellParams c;
    auto gate = [&](Tensor& p, Tensor& q, Tensor& b) {
        p = uniform_init({d_in}, -0.1, 0.1, rng);
        q = glorot(d_in, d_in, rng);
        b = Tensor::zeros({d_in, d_out}, true);
    };
    gate(c.p_z, c.q_z, c.b_z);
    gate(c.p_r, c.q_r, c.b_r);
    gate(c.p_w, c.q_w, c.b_w);
    c.sum_w = glorot(d_in, d_out, rng);
    c.sum_b = Tensor::zeros({d_out}, true);
    return c;
}

void GruCellParams::collect_parameters(const std::string& prefix,
                                       NamedTensors& out) const {
    out.emplace_back(prefix + ".pz", p_z);
    out.emplace_back(prefix + ".qz", q_z);
    out.emplace_back(prefix + ".bz", b_z);
    out.emplace_back(prefix + ".pr", p_r);
    out.emplace_back(prefix + ".qr", q_r);
    out.emplace_back(prefix + ".br", b_r);
    out.emplace_back(prefix + ".pw", p_w);
    out.emplace_back(prefix + ".qw", q_w);
    out.emplace_back(prefix + ".bw", b_w);
    out.emplace_back(prefix + ".sw", sum_w);
    out.emplace_back(prefix + ".sb", sum_b);
}

AttentionParams AttentionParams::init(size_t d, Rng& rng) {
    AttentionParams a;
    a.w_att = glorot(d, d, rng);
    a.psi = uniform_init({2 * d, 1}, -0.1, 0.1, rng);
    return a;
}

void AttentionParams::collect_parameters(const std::string& prefix,
                                         NamedTensors& out) const {
    out.emplace_back(prefix + ".watt", w_att);
    out.emplace_back(prefix + ".psi", psi);
}

MlpParams MlpParams::init(size_t d_in, size_t hidden, size_t d_out, Rng& rng) {
    MlpParams m;
    m.w1 = glorot(d_in, hidden, rng);
    m.b1 = Tensor::zeros({hidden}, true);
    m.w2 = glorot(hidden, d_out, rng);
    m.b2 = Tensor::zeros({d_out}, true);
    return m;
}

void MlpParams::collect_parameters(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".w1", w1);
    out.emplace_back(prefix + ".b1", b1);
    out.emplace_back(prefix + ".w2", w2);
    out.emplace_back(prefix + ".b2", b2);
}

Tensor mlp_forward(const Tensor& x, const MlpParams& mlp) {
    return affine(relu(affine(x, mlp.w1, mlp.b1)), mlp.w2, mlp.b2);
}

Tensor dynamic_gcn_forward(const Tensor& y, const Tensor& a, const Tensor& w) {
    if (a.rows() != y.rows())
        throw std::invalid_argument("dynamic_gcn_forward: adjacency covers " +
                                    std::to_string(a.rows()) + " nodes but features " +
                                    std::to_string(y.rows()));
    return relu(matmul(matmul(normalize_adjacency_t(a), y), w));
}

Tensor gru_weight_update(const Tensor& y_prev, const Tensor& w_prev,
                         const GruCellParams& cell) {
    size_t d_in = w_prev.rows(), d_out = w_prev.cols();
    if (y_prev.cols() != d_in)
        throw std::invalid_argument("gru_weight_update: feature width " +
                                    std::to_string(y_prev.cols()) +
                                    " does not match weight rows " +
                                    std::to_string(d_in));
    Tensor summary = reshape(mean_axis(y_prev, 0), {1, d_in});
    Tensor v = reshape(affine(summary, cell.sum_w, cell.sum_b), {d_out});

    Tensor z = sigmoid(add(add(outer(cell.p_z, v), matmul(cell.q_z, w_prev)), cell.b_z));
    Tensor r = sigmoid(add(add(outer(cell.p_r, v), matmul(cell.q_r, w_prev)), cell.b_r));
    Tensor cand = tanh_t(
        add(add(outer(cell.p_w, v), matmul(cell.q_w, mul(r, w_prev))), cell.b_w));
    Tensor keep = sub(Tensor::full({d_in, d_out}, 1.0), z);
    return add(mul(keep, w_prev), mul(z, cand));
}

Tensor causal_mask(size_t n) {
    Tensor m = Tensor::zeros({n, n});
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j <= i; ++j) m.mutable_data()[i * n + j] = 1.0;
    return m;
}

Tensor attention_adjacency(const Tensor& y_observed, const AttentionParams& params,
                           const Tensor& mask, double leaky_slope) {
    size_t n = y_observed.rows(), d = y_observed.cols();
    if (params.psi.rows() != 2 * d)
        throw std::invalid_argument("attention_adjacency: psi length mismatch");
    Tensor yw = matmul(y_observed, params.w_att);
    Tensor self_score = reshape(matmul(yw, slice_rows(params.psi, 0, d)), {n});
    Tensor neigh_score = reshape(matmul(yw, slice_rows(params.psi, d, 2 * d)), {n});
    Tensor ones = Tensor::full({n}, 1.0);
    Tensor scores =
        leaky_relu(add(outer(self_score, ones), outer(ones, neigh_score)), leaky_slope);
    return softmax_masked(scores, mask);
}

Tensor refine_adjacency(const Tensor& a_prev, const Tensor& att, const Tensor& weight,
                        const Tensor& bias) {
    if (a_prev.shape() != att.shape())
        throw std::invalid_argument("refine_adjacency: shape mismatch " +
                                    a_prev.shape_str() + " vs " + att.shape_str());
    size_t n = a_prev.rows();
    Tensor s = sigmoid(scalar_affine(add(a_prev, att), weight, bias));
    Tensor sym = scalar_mul(add(s, transpose(s)), 0.5);
    // interior = everything off-diagonal away from the encoder node
    Tensor interior = Tensor::zeros({n, n});
    Tensor pinned = Tensor::zeros({n, n});
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) {
            bool pin = (i == j || i == 0 || j == 0);
            (pin ? pinned : interior).mutable_data()[i * n + j] = 1.0;
        }
    return add(mul(sym, interior), pinned);
}

Tensor materialize_full_adjacency(const Tensor& a_obs, size_t n_total) {
    size_t m = a_obs.rows();
    if (n_total < m)
        throw std::invalid_argument("materialize_full_adjacency: target too small");
    Tensor out = pad_matrix(a_obs, n_total, n_total);
    Tensor pins = Tensor::zeros({n_total, n_total});
    for (size_t i = m; i < n_total; ++i) {
        pins.mutable_data()[i * n_total + i] = 1.0;
        pins.mutable_data()[i * n_total + 0] = 1.0;
        pins.mutable_data()[0 * n_total + i] = 1.0;
    }
    return add(out, pins);
}

Tensor layer_output_update(const Tensor& y, size_t l, size_t num_layers,
                           const Tensor& token_embedding, const Tensor& r_source,
                           const Tensor& r_target, const MlpParams& mlp) {
    if (l < 1 || l > num_layers)
        throw std::invalid_argument("layer_output_update: layer index out of range");
    Tensor input = y;
    if (l == num_layers && num_layers > 1) {
        if (r_source.data().empty() || r_target.data().empty())
            throw std::invalid_argument(
                "layer_output_update: last layer needs both walk representations");
        input = concat_cols(concat_cols(y, broadcast_rows(r_source, y.rows())),
                            broadcast_rows(r_target, y.rows()));
    } else if (l == 1) {
        if (token_embedding.data().empty())
            throw std::invalid_argument(
                "layer_output_update: first layer needs the token embedding");
        input = concat_cols(y, broadcast_rows(token_embedding, y.rows()));
    }
    if (input.cols() != mlp.w1.rows())
        throw std::invalid_argument("layer_output_update: mlp expects width " +
                                    std::to_string(mlp.w1.rows()) + ", got " +
                                    std::to_string(input.cols()));
    return mlp_forward(input, mlp);
}

}  // namespace stgcd
