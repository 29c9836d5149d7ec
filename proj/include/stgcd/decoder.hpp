#pragma once

#include <vector>

#include "stgcd/checkpoint.hpp"
#include "stgcd/config.hpp"
#include "stgcd/encoder.hpp"
#include "stgcd/graph.hpp"
#include "stgcd/rw_kernel.hpp"
#include "stgcd/spatial.hpp"
#include "stgcd/temporal.hpp"

namespace stgcd {

inline constexpr int kBosId = 0;
inline constexpr int kEosId = 1;

struct BlockParams {
    Tensor w0;  // initial weight state of the evolving GCN
    GruCellParams gru;
    AttentionParams att;
    Tensor refine_w, refine_b;
    MlpParams out_mlp;
    TemporalBlockParams temporal;
};

struct Model {
    ModelConfig cfg;
    EncoderParams enc;
    HiddenGraphBank bank;
    Tensor dec_embed;     // vocab x d_emb
    std::vector<BlockParams> blocks;
    Tensor out_w, out_b;  // vocabulary projection

    static Model init(const ModelConfig& cfg, Rng& rng);
    NamedTensors parameters() const;
};

// Node 0 is the encoder node; token node t is row/column t of the observed
// block. Adjacency and weight state are per block; output rows are frozen
// the step they are produced.
struct DecoderState {
    size_t t = 0;
    size_t n_max = 0;
    Tensor sog;
    Tensor r_source;                 // zero vector when source walks are off
    std::vector<Tensor> a;           // per block, (t+1) x (t+1)
    std::vector<Tensor> w;           // per block GRU weight state
    std::vector<Tensor> spat_hist;   // per block, t x d spatial rows
    std::vector<Tensor> block_out;   // per block, t x d output rows
    std::vector<double> emitted;     // append-only t x t adjacency snapshot
    std::vector<int> tokens;

    Tensor full_adjacency(size_t block) const;
    DecoderState clone_detached() const;
};

struct StepOutput {
    Tensor logits;           // vocabulary scores of the new node
    Tensor adj_token_block;  // differentiable t x t token-block of A^L
    std::vector<double> adj_row;  // emitted row linking the new node
};

struct DecodeResult {
    std::vector<int> tokens;         // without BOS/EOS
    SyntacticGraph graph;
    std::vector<double> adjacency;   // emitted real-valued token block
    double logprob = 0.0;            // sum over emitted steps incl. EOS
    size_t steps = 0;
};

DecoderState init_state(const Model& m, const EncoderOutput& enc, size_t n_max,
                        const TrainConfig& flags);

StepOutput step(const Model& m, DecoderState& st, int prev_token,
                const TrainConfig& flags);

DecodeResult greedy_decode(const Model& m, const EncoderOutput& enc, size_t max_len,
                           const TrainConfig& flags);

DecodeResult beam_decode(const Model& m, const EncoderOutput& enc, size_t beam_size,
                         size_t max_len, const TrainConfig& flags);

}  // namespace stgcd
