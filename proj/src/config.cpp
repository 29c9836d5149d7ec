#include "stgcd/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stgcd {

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper() {
    ModelConfig c;
    c.d_model = 512;
    c.d_emb = 512;
    c.enc_layers = 6;
    c.enc_heads = 4;
    c.enc_ffn = 2048;
    c.dec_blocks = 4;
    c.vocab_size = 30000;
    c.max_len = 64;
    c.walk_steps = 1;
    c.global_graphs = 6;
    c.global_nodes = 6;
    c.local_graphs = 6;
    c.local_nodes = 4;
    c.rw_embed_dim = 16;
    return c;
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
    TrainConfig c;
    c.lr = 1e-4;
    c.batch_size = 96;
    c.beam_size = 12;
    return c;
}

Config Config::preset(const std::string& name) {
    if (name == "desk") return Config{ModelConfig::desk(), TrainConfig::desk()};
    if (name == "paper") return Config{ModelConfig::paper(), TrainConfig::paper()};
    throw std::invalid_argument("unknown preset: " + name);
}

namespace {

size_t to_size(const std::string& v) { return static_cast<size_t>(std::stoull(v)); }
double to_double(const std::string& v) { return std::stod(v); }
bool to_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("expected boolean, got: " + v);
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) {
    if (key == "d_model") model.d_model = to_size(value);
    else if (key == "d_emb") model.d_emb = to_size(value);
    else if (key == "enc_layers") model.enc_layers = to_size(value);
    else if (key == "enc_heads") model.enc_heads = to_size(value);
    else if (key == "enc_ffn") model.enc_ffn = to_size(value);
    else if (key == "dec_blocks") model.dec_blocks = to_size(value);
    else if (key == "vocab_size") model.vocab_size = to_size(value);
    else if (key == "max_len") model.max_len = to_size(value);
    else if (key == "walk_steps") model.walk_steps = to_size(value);
    else if (key == "global_graphs") model.global_graphs = to_size(value);
    else if (key == "global_nodes") model.global_nodes = to_size(value);
    else if (key == "local_graphs") model.local_graphs = to_size(value);
    else if (key == "local_nodes") model.local_nodes = to_size(value);
    else if (key == "rw_embed_dim") model.rw_embed_dim = to_size(value);
    else if (key == "leaky_slope") model.leaky_slope = to_double(value);
    else if (key == "lr") train.lr = to_double(value);
    else if (key == "beta1") train.beta1 = to_double(value);
    else if (key == "beta2") train.beta2 = to_double(value);
    else if (key == "eps") train.eps = to_double(value);
    else if (key == "clip_norm") train.clip_norm = to_double(value);
    else if (key == "batch_size") train.batch_size = to_size(value);
    else if (key == "epochs") train.epochs = to_size(value);
    else if (key == "seed") train.seed = std::stoull(value);
    else if (key == "beam_size") train.beam_size = to_size(value);
    else if (key == "no_random_walk") train.no_random_walk = to_bool(value);
    else if (key == "no_source_walk") train.no_source_walk = to_bool(value);
    else if (key == "static_weights") train.static_weights = to_bool(value);
    else if (key == "static_adjacency") train.static_adjacency = to_bool(value);
    else if (key == "no_temporal") train.no_temporal = to_bool(value);
    else if (key == "teacher_force_graphs") train.teacher_force_graphs = to_bool(value);
    else throw std::invalid_argument("unknown config key: " + key);
}

Config Config::from_file(const std::string& path, const Config& base) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    Config cfg = base;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected `key = value`");
        try {
            cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                                     e.what());
        }
    }
    return cfg;
}

std::string Config::describe() const {
    std::ostringstream os;
    os << "d_model = " << model.d_model << "\n"
       << "d_emb = " << model.d_emb << "\n"
       << "enc_layers = " << model.enc_layers << "\n"
       << "enc_heads = " << model.enc_heads << "\n"
       << "enc_ffn = " << model.enc_ffn << "\n"
       << "dec_blocks = " << model.dec_blocks << "\n"
       << "vocab_size = " << model.vocab_size << "\n"
       << "max_len = " << model.max_len << "\n"
       << "walk_steps = " << model.walk_steps << "\n"
       << "global_graphs = " << model.global_graphs << "\n"
       << "global_nodes = " << model.global_nodes << "\n"
       << "local_graphs = " << model.local_graphs << "\n"
       << "local_nodes = " << model.local_nodes << "\n"
       << "rw_embed_dim = " << model.rw_embed_dim << "\n"
       << "leaky_slope = " << model.leaky_slope << "\n"
       << "lr = " << train.lr << "\n"
       << "beta1 = " << train.beta1 << "\n"
       << "beta2 = " << train.beta2 << "\n"
       << "eps = " << train.eps << "\n"
       << "clip_norm = " << train.clip_norm << "\n"
       << "batch_size = " << train.batch_size << "\n"
       << "epochs = " << train.epochs << "\n"
       << "seed = " << train.seed << "\n"
       << "beam_size = " << train.beam_size << "\n"
       << "no_random_walk = " << (train.no_random_walk ? "true" : "false") << "\n"
       << "no_source_walk = " << (train.no_source_walk ? "true" : "false") << "\n"
       << "static_weights = " << (train.static_weights ? "true" : "false") << "\n"
       << "static_adjacency = " << (train.static_adjacency ? "true" : "false") << "\n"
       << "no_temporal = " << (train.no_temporal ? "true" : "false") << "\n"
       << "teacher_force_graphs = " << (train.teacher_force_graphs ? "true" : "false")
       << "\n";
    return os.str();
}

}  // namespace stgcd
