#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace stgcd {

// Architectural hyperparameters. The desk preset is small enough to train on
// one CPU core; the paper preset reproduces the published sizes and is only
// expected to construct and shape-check.
struct ModelConfig {
    size_t d_model = 64;
    size_t d_emb = 64;           // token embedding width fed to the first block
    size_t enc_layers = 2;
    size_t enc_heads = 2;
    size_t enc_ffn = 128;
    size_t dec_blocks = 2;
    size_t vocab_size = 64;      // overwritten from the corpus vocabulary
    size_t max_len = 16;
    size_t walk_steps = 1;       // random-walk step set is {0..walk_steps}
    size_t global_graphs = 3;
    size_t global_nodes = 6;
    size_t local_graphs = 3;
    size_t local_nodes = 4;
    size_t rw_embed_dim = 16;    // hidden-graph embedding width after projection
    double leaky_slope = 0.2;
    size_t temporal_kernel = 2;
    std::vector<size_t> temporal_dilations = {1, 2};

    static ModelConfig desk();
    static ModelConfig paper();

    size_t walk_rep_width() const {
        return (global_graphs + local_graphs) * (walk_steps + 1);
    }
};

struct TrainConfig {
    double lr = 1e-4;
    double beta1 = 0.9;          // momentum term of Adam
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 5.0;
    size_t batch_size = 8;
    size_t epochs = 10;
    uint64_t seed = 1;
    size_t beam_size = 1;
    // Ablation switches.
    bool no_random_walk = false;
    bool no_source_walk = false;
    bool static_weights = false;
    bool static_adjacency = false;
    bool no_temporal = false;
    // Diagnostic switch: feed gold prefix adjacency into the refinement
    // recursion instead of the model's own previous adjacency.
    bool teacher_force_graphs = false;

    static TrainConfig desk();
    static TrainConfig paper();
};

struct Config {
    ModelConfig model;
    TrainConfig train;

    static Config preset(const std::string& name);  // "desk" | "paper"
    // Line-oriented `key = value` text; unknown keys are rejected.
    static Config from_file(const std::string& path, const Config& base);
    void set(const std::string& key, const std::string& value);
    std::string describe() const;
};

}  // namespace stgcd
