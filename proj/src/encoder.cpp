#include "stgcd/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace stgcd {

EncoderParams EncoderParams::init(const ModelConfig& cfg, Rng& rng) {
    if (cfg.d_model % cfg.enc_heads != 0)
        throw std::invalid_argument("d_model must be divisible by the head count");
    EncoderParams p;
    p.heads = cfg.enc_heads;
    p.max_len = cfg.max_len;
    p.token_embed = glorot(cfg.vocab_size, cfg.d_model, rng);
    size_t d_head = cfg.d_model / cfg.enc_heads;
    p.layers.resize(cfg.enc_layers);
    for (auto& layer : p.layers) {
        for (size_t h = 0; h < cfg.enc_heads; ++h) {
            layer.wq.push_back(glorot(cfg.d_model, d_head, rng));
            layer.wk.push_back(glorot(cfg.d_model, d_head, rng));
            layer.wv.push_back(glorot(cfg.d_model, d_head, rng));
        }
        layer.wo = glorot(cfg.d_model, cfg.d_model, rng);
        layer.ln1_gain = Tensor::full({cfg.d_model}, 1.0, true);
        layer.ln1_bias = Tensor::zeros({cfg.d_model}, true);
        layer.ln2_gain = Tensor::full({cfg.d_model}, 1.0, true);
        layer.ln2_bias = Tensor::zeros({cfg.d_model}, true);
        layer.ff_w1 = glorot(cfg.d_model, cfg.enc_ffn, rng);
        layer.ff_b1 = Tensor::zeros({cfg.enc_ffn}, true);
        layer.ff_w2 = glorot(cfg.enc_ffn, cfg.d_model, rng);
        layer.ff_b2 = Tensor::zeros({cfg.d_model}, true);
    }
    return p;
}

void EncoderParams::collect_parameters(NamedTensors& out) const {
    out.emplace_back("enc.embed", token_embed);
    for (size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        std::string base = "enc.layer" + std::to_string(l) + ".";
        for (size_t h = 0; h < layer.wq.size(); ++h) {
            std::string hb = base + "h" + std::to_string(h) + ".";
            out.emplace_back(hb + "wq", layer.wq[h]);
            out.emplace_back(hb + "wk", layer.wk[h]);
            out.emplace_back(hb + "wv", layer.wv[h]);
        }
        out.emplace_back(base + "wo", layer.wo);
        out.emplace_back(base + "ln1.gain", layer.ln1_gain);
        out.emplace_back(base + "ln1.bias", layer.ln1_bias);
        out.emplace_back(base + "ln2.gain", layer.ln2_gain);
        out.emplace_back(base + "ln2.bias", layer.ln2_bias);
        out.emplace_back(base + "ff.w1", layer.ff_w1);
        out.emplace_back(base + "ff.b1", layer.ff_b1);
        out.emplace_back(base + "ff.w2", layer.ff_w2);
        out.emplace_back(base + "ff.b2", layer.ff_b2);
    }
}

namespace {

Tensor sinusoidal_encoding(size_t len, size_t d_model) {
    Tensor pe = Tensor::zeros({len, d_model});
    auto& data = pe.mutable_data();
    for (size_t pos = 0; pos < len; ++pos)
        for (size_t i = 0; i < d_model; ++i) {
            double angle = pos / std::pow(10000.0, double(2 * (i / 2)) / d_model);
            data[pos * d_model + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    return pe;
}

Tensor self_attention(const Tensor& x, const EncoderLayerParams& layer) {
    size_t d_head = layer.wq[0].cols();
    double scale = 1.0 / std::sqrt(double(d_head));
    Tensor merged;
    for (size_t h = 0; h < layer.wq.size(); ++h) {
        Tensor q = matmul(x, layer.wq[h]);
        Tensor k = matmul(x, layer.wk[h]);
        Tensor v = matmul(x, layer.wv[h]);
        Tensor attn = softmax_rows(scalar_mul(matmul(q, transpose(k)), scale));
        Tensor head = matmul(attn, v);
        merged = (h == 0) ? head : concat_cols(merged, head);
    }
    return matmul(merged, layer.wo);
}

}  // namespace

Tensor transformer_encode(const std::vector<int>& tokens, const EncoderParams& params) {
    if (tokens.empty())
        throw std::invalid_argument("transformer_encode: empty token sequence");
    if (params.max_len > 0 && tokens.size() > params.max_len)
        throw std::invalid_argument("transformer_encode: sequence length " +
                                    std::to_string(tokens.size()) +
                                    " exceeds maximum " + std::to_string(params.max_len));
    for (int id : tokens)
        if (id < 0 || static_cast<size_t>(id) >= params.token_embed.rows())
            throw std::invalid_argument("transformer_encode: token id " +
                                        std::to_string(id) + " outside vocabulary");
    Tensor x = add(embedding(params.token_embed, tokens),
                   sinusoidal_encoding(tokens.size(), params.d_model()));
    for (const auto& layer : params.layers) {
        x = layer_norm(add(x, self_attention(x, layer)), layer.ln1_gain, layer.ln1_bias);
        Tensor ff = affine(relu(affine(x, layer.ff_w1, layer.ff_b1)),
                           layer.ff_w2, layer.ff_b2);
        x = layer_norm(add(x, ff), layer.ln2_gain, layer.ln2_bias);
    }
    return x;
}

Tensor build_source_graph(const std::vector<int>& heads) {
    auto g = SyntacticGraph::from_heads(heads);
    return Tensor::from(g.adjacency, {g.n, g.n});
}

Tensor sog_pool(const Tensor& x) {
    if (x.rank() != 2 || x.rows() == 0)
        throw std::invalid_argument("sog_pool: need at least one token row");
    return mean_axis(x, 0);
}

Tensor source_rw_reps(const Tensor& x, const Tensor& a_src,
                      const HiddenGraphBank& bank) {
    return graph_representation(a_src, x, bank);
}

EncoderOutput encode(const std::vector<int>& tokens, const std::vector<int>& heads,
                     const EncoderParams& params, const HiddenGraphBank& bank,
                     bool with_walks) {
    if (tokens.size() != heads.size())
        throw std::invalid_argument("encode: token/head length mismatch");
    EncoderOutput out;
    out.x = transformer_encode(tokens, params);
    out.sog = sog_pool(out.x);
    out.a_src = build_source_graph(heads);
    if (with_walks) out.rw = source_rw_reps(out.x, out.a_src, bank);
    return out;
}

}  // namespace stgcd
