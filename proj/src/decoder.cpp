#include "stgcd/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace stgcd {

Model Model::init(const ModelConfig& cfg, Rng& rng) {
    Model m;
    m.cfg = cfg;
    m.enc = EncoderParams::init(cfg, rng);
    m.bank = HiddenGraphBank::init(cfg, rng);
    m.dec_embed = glorot(cfg.vocab_size, cfg.d_emb, rng);
    size_t rep = cfg.walk_rep_width();
    for (size_t b = 0; b < cfg.dec_blocks; ++b) {
        BlockParams blk;
        blk.w0 = glorot(cfg.d_model, cfg.d_model, rng);
        blk.gru = GruCellParams::init(cfg.d_model, cfg.d_model, rng);
        blk.att = AttentionParams::init(cfg.d_model, rng);
        blk.refine_w = Tensor::scalar(1.0, true);
        blk.refine_b = Tensor::scalar(0.0, true);
        size_t in_width = cfg.d_model;
        if (b == 0)
            in_width += cfg.d_emb;
        else if (b + 1 == cfg.dec_blocks)
            in_width += 2 * rep;
        blk.out_mlp = MlpParams::init(in_width, cfg.d_model, cfg.d_model, rng);
        blk.temporal = TemporalBlockParams::init(cfg.d_model, rng);
        m.blocks.push_back(std::move(blk));
    }
    m.out_w = glorot(cfg.d_model, cfg.vocab_size, rng);
    m.out_b = Tensor::zeros({cfg.vocab_size}, true);
    return m;
}

NamedTensors Model::parameters() const {
    NamedTensors out;
    enc.collect_parameters(out);
    bank.collect_parameters(out);
    out.emplace_back("dec.embed", dec_embed);
    for (size_t b = 0; b < blocks.size(); ++b) {
        const auto& blk = blocks[b];
        std::string base = "dec.block" + std::to_string(b) + ".";
        out.emplace_back(base + "spatial.w0", blk.w0);
        blk.gru.collect_parameters(base + "spatial.gru", out);
        blk.att.collect_parameters(base + "spatial.att", out);
        out.emplace_back(base + "spatial.refine.w", blk.refine_w);
        out.emplace_back(base + "spatial.refine.b", blk.refine_b);
        blk.out_mlp.collect_parameters(base + "spatial.mlp", out);
        blk.temporal.collect_parameters(base + "temporal", out);
    }
    out.emplace_back("dec.out.w", out_w);
    out.emplace_back("dec.out.b", out_b);
    return out;
}

namespace {

Tensor detach_or_empty(const Tensor& x) {
    return x.data().empty() ? Tensor() : x.detach();
}

Tensor token_block(const Tensor& a) {
    size_t n = a.rows();
    Tensor r = slice_rows(a, 1, n);
    return transpose(slice_rows(transpose(r), 1, n));
}

// Extends the observed adjacency by one unconnected node (self-loop plus the
// encoder edge).
Tensor grow_observed(const Tensor& a_prev) {
    size_t n = a_prev.rows();
    Tensor g = pad_matrix(a_prev, n + 1, n + 1);
    Tensor pins = Tensor::zeros({n + 1, n + 1});
    pins.mutable_data()[n * (n + 1) + n] = 1.0;
    pins.mutable_data()[n] = 1.0;
    pins.mutable_data()[n * (n + 1)] = 1.0;
    return add(g, pins);
}

void check_adjacency_bounds(const Tensor& a) {
    for (double v : a.data())
        if (!(v >= 0.0 && v <= 1.0))
            throw std::runtime_error("adjacency entry outside [0,1]: " +
                                     std::to_string(v));
}

std::vector<double> log_softmax_values(const Tensor& logits) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits.data()) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : logits.data()) z += std::exp(v - mx);
    double lse = mx + std::log(z);
    std::vector<double> out;
    out.reserve(logits.size());
    for (double v : logits.data()) out.push_back(v - lse);
    return out;
}

}  // namespace

Tensor DecoderState::full_adjacency(size_t block) const {
    return materialize_full_adjacency(a.at(block), n_max + 1);
}

DecoderState DecoderState::clone_detached() const {
    DecoderState c;
    c.t = t;
    c.n_max = n_max;
    c.sog = detach_or_empty(sog);
    c.r_source = detach_or_empty(r_source);
    for (const auto& x : a) c.a.push_back(detach_or_empty(x));
    for (const auto& x : w) c.w.push_back(detach_or_empty(x));
    for (const auto& x : spat_hist) c.spat_hist.push_back(detach_or_empty(x));
    for (const auto& x : block_out) c.block_out.push_back(detach_or_empty(x));
    c.emitted = emitted;
    c.tokens = tokens;
    return c;
}

DecoderState init_state(const Model& m, const EncoderOutput& enc, size_t n_max,
                        const TrainConfig& flags) {
    if (n_max < 1) throw std::invalid_argument("init_state: n_max must be >= 1");
    DecoderState st;
    st.n_max = n_max;
    st.sog = enc.sog;
    if (flags.no_random_walk || flags.no_source_walk || enc.rw.data().empty())
        st.r_source = Tensor::zeros({m.cfg.walk_rep_width()});
    else
        st.r_source = enc.rw;
    for (size_t b = 0; b < m.blocks.size(); ++b) {
        st.a.push_back(Tensor::from({1.0}, {1, 1}));
        st.w.push_back(m.blocks[b].w0);
        st.spat_hist.emplace_back();
        st.block_out.emplace_back();
    }
    return st;
}

StepOutput step(const Model& m, DecoderState& st, int prev_token,
                const TrainConfig& flags) {
    if (st.t >= st.n_max)
        throw std::runtime_error("step: decoder capacity of " +
                                 std::to_string(st.n_max) + " nodes exceeded");
    if (prev_token < 0 || static_cast<size_t>(prev_token) >= m.cfg.vocab_size)
        throw std::invalid_argument("step: token id " + std::to_string(prev_token) +
                                    " outside vocabulary");
    size_t nt = st.t + 1;  // token nodes after insertion
    size_t d = m.cfg.d_model;
    size_t num_blocks = m.blocks.size();
    Tensor sog_row = reshape(st.sog, {1, d});
    Tensor prev_emb = reshape(embedding(m.dec_embed, {prev_token}), {m.cfg.d_emb});

    Tensor a_last, last_out_row;
    for (size_t b = 0; b < num_blocks; ++b) {
        const BlockParams& blk = m.blocks[b];
        Tensor in_seq = (b == 0) ? Tensor::zeros({nt, d}) : st.block_out[b - 1];
        Tensor y_nodes = concat_rows(sog_row, in_seq);

        Tensor grown = grow_observed(st.a[b]);
        Tensor a_new;
        if (flags.static_adjacency) {
            a_new = grown;
        } else {
            Tensor att = attention_adjacency(y_nodes, blk.att, causal_mask(nt + 1),
                                             m.cfg.leaky_slope);
            a_new = refine_adjacency(grown, att, blk.refine_w, blk.refine_b);
        }
        Tensor w_new =
            flags.static_weights ? st.w[b] : gru_weight_update(y_nodes, st.w[b], blk.gru);

        Tensor g = dynamic_gcn_forward(y_nodes, a_new, w_new);
        g = concat_rows(sog_row, slice_rows(g, 1, nt + 1));

        Tensor r_target;
        if (b + 1 == num_blocks && num_blocks > 1)
            r_target = flags.no_random_walk
                           ? Tensor::zeros({m.cfg.walk_rep_width()})
                           : graph_representation(a_new, g, m.bank);
        Tensor y_upd = layer_output_update(g, b + 1, num_blocks,
                                           b == 0 ? prev_emb : Tensor(), st.r_source,
                                           r_target, blk.out_mlp);
        Tensor spat_row = slice_rows(y_upd, nt, nt + 1);
        Tensor spat_seq =
            (st.t == 0) ? spat_row : concat_rows(st.spat_hist[b], spat_row);

        Tensor out_row;
        if (flags.no_temporal) {
            out_row = spat_row;
        } else {
            Tensor hist = causal_unit(matmul(spat_seq, blk.temporal.pre_w), blk.temporal);
            Tensor feats = concat_rows(sog_row, hist);
            Tensor g2 = dynamic_gcn_forward(feats, a_new, blk.temporal.gcn_w);
            out_row = slice_rows(g2, nt, nt + 1);
        }

        check_adjacency_bounds(a_new);
        st.a[b] = a_new;
        st.w[b] = w_new;
        st.spat_hist[b] = spat_seq;
        st.block_out[b] = (st.t == 0) ? out_row : concat_rows(st.block_out[b], out_row);
        a_last = a_new;
        last_out_row = out_row;
    }

    StepOutput out;
    out.logits = reshape(affine(last_out_row, m.out_w, m.out_b), {m.cfg.vocab_size});
    out.adj_token_block = token_block(a_last);
    out.adj_row.reserve(nt);
    for (size_t j = 0; j < nt; ++j) out.adj_row.push_back(a_last.at(nt, j + 1));

    std::vector<double> emitted(nt * nt, 0.0);
    for (size_t i = 0; i + 1 < nt; ++i)
        for (size_t j = 0; j + 1 < nt; ++j)
            emitted[i * nt + j] = st.emitted[i * (nt - 1) + j];
    for (size_t j = 0; j < nt; ++j) {
        emitted[(nt - 1) * nt + j] = out.adj_row[j];
        emitted[j * nt + (nt - 1)] = out.adj_row[j];
    }
    st.emitted = std::move(emitted);
    st.t = nt;
    return out;
}

namespace {

DecodeResult finalize(const DecoderState& st, double sum_lp, size_t steps) {
    DecodeResult res;
    res.tokens = st.tokens;
    res.logprob = sum_lp;
    res.steps = steps;
    size_t n = res.tokens.size();
    res.adjacency.resize(n * n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
            res.adjacency[i * n + j] = st.emitted[i * st.t + j];
    std::vector<int> heads = extract_heads(res.adjacency, n);
    res.graph = SyntacticGraph::from_heads(heads);
    return res;
}

}  // namespace

DecodeResult greedy_decode(const Model& m, const EncoderOutput& enc, size_t max_len,
                           const TrainConfig& flags) {
    NoGradGuard ng;
    DecoderState st = init_state(m, enc, max_len, flags);
    int prev = kBosId;
    double sum_lp = 0.0;
    size_t steps = 0;
    for (size_t s = 0; s < max_len; ++s) {
        StepOutput out = step(m, st, prev, flags);
        auto lps = log_softmax_values(out.logits);
        size_t best = 0;
        for (size_t i = 1; i < lps.size(); ++i)
            if (lps[i] > lps[best]) best = i;
        sum_lp += lps[best];
        ++steps;
        if (static_cast<int>(best) == kEosId) break;
        st.tokens.push_back(static_cast<int>(best));
        prev = static_cast<int>(best);
    }
    return finalize(st, sum_lp, steps);
}

DecodeResult beam_decode(const Model& m, const EncoderOutput& enc, size_t beam_size,
                         size_t max_len, const TrainConfig& flags) {
    if (beam_size < 1) throw std::invalid_argument("beam_decode: beam size must be >= 1");
    NoGradGuard ng;
    struct Hyp {
        DecoderState st;
        int prev = kBosId;
        double sum_lp = 0.0;
        size_t steps = 0;
        bool done = false;
        double mean() const { return steps == 0 ? 0.0 : sum_lp / double(steps); }
    };
    std::vector<Hyp> beam(1);
    beam[0].st = init_state(m, enc, max_len, flags);

    for (size_t s = 0; s < max_len; ++s) {
        bool any_live = false;
        std::vector<Hyp> candidates;
        for (auto& hyp : beam) {
            if (hyp.done) {
                candidates.push_back(std::move(hyp));
                continue;
            }
            any_live = true;
            StepOutput out = step(m, hyp.st, hyp.prev, flags);
            auto lps = log_softmax_values(out.logits);
            std::vector<size_t> order(lps.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::stable_sort(order.begin(), order.end(),
                             [&](size_t a, size_t b) { return lps[a] > lps[b]; });
            size_t width = std::min(beam_size, order.size());
            for (size_t k = 0; k < width; ++k) {
                size_t tok = order[k];
                Hyp child;
                child.st = hyp.st.clone_detached();
                child.sum_lp = hyp.sum_lp + lps[tok];
                child.steps = hyp.steps + 1;
                if (static_cast<int>(tok) == kEosId) {
                    child.done = true;
                } else {
                    child.st.tokens.push_back(static_cast<int>(tok));
                    child.prev = static_cast<int>(tok);
                }
                candidates.push_back(std::move(child));
            }
        }
        if (!any_live) break;
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const Hyp& a, const Hyp& b) { return a.mean() > b.mean(); });
        if (candidates.size() > beam_size) candidates.resize(beam_size);
        beam = std::move(candidates);
    }
    const Hyp* best = &beam[0];
    for (const auto& h : beam)
        if (h.mean() > best->mean()) best = &h;
    return finalize(best->st, best->sum_lp, best->steps);
}

}  // namespace stgcd
