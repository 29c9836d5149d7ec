#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stgcd/decoder.hpp"
#include "stgcd/metrics.hpp"
#include "stgcd/training.hpp"

using namespace stgcd;

namespace {

struct CommonOpts {
    std::string preset = "desk";
    std::string config_path;
    std::vector<std::string> overrides;
    int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--preset", opts.preset, "Configuration preset: desk or paper");
    cmd->add_option("--config", opts.config_path, "Path to a key = value config file");
    cmd->add_option("--set", opts.overrides,
                    "Override a single config key, e.g. --set lr=0.001");
    cmd->add_option("--seed", opts.seed, "Random seed override");
}

Config resolve_config(const CommonOpts& opts) {
    Config cfg = Config::preset(opts.preset);
    if (!opts.config_path.empty()) cfg = Config::from_file(opts.config_path, cfg);
    for (const auto& kv : opts.overrides) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("override must look like key=value: " + kv);
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (opts.seed >= 0) cfg.train.seed = static_cast<uint64_t>(opts.seed);
    std::cout << "# effective configuration\n" << cfg.describe();
    return cfg;
}

Model load_model(const Config& cfg, const Vocab& vocab,
                 const std::string& checkpoint) {
    ModelConfig mc = cfg.model;
    mc.vocab_size = vocab.size();
    Rng rng(cfg.train.seed);
    Model m = Model::init(mc, rng);
    if (!checkpoint.empty()) {
        NamedTensors params = m.parameters();
        restore_parameters(load_checkpoint(checkpoint), params);
    }
    return m;
}

nlohmann::json decode_record(const DecodeResult& res, const Vocab& vocab) {
    nlohmann::json j;
    j["tokens"] = vocab.words(res.tokens);
    j["heads"] = res.graph.heads;
    j["adjacency"] = res.adjacency;
    j["logprob"] = res.logprob;
    return j;
}

int run_kernel_check() {
    size_t mismatches = 0, cases = 0;
    for (size_t n = 1; n <= 4; ++n) {
        size_t n_pairs = n * (n - 1) / 2;
        for (size_t bits = 0; bits < (1u << n_pairs); ++bits) {
            std::vector<double> a(n * n, 0.0);
            size_t b = 0;
            for (size_t i = 0; i < n; ++i)
                for (size_t j = i + 1; j < n; ++j, ++b)
                    if (bits & (1u << b)) a[i * n + j] = a[j * n + i] = 1.0;
            for (size_t m = 1; m <= 3; ++m) {
                size_t m_pairs = m * (m - 1) / 2;
                for (size_t hb = 0; hb < (1u << m_pairs); ++hb) {
                    std::vector<double> ah(m * m, 0.0);
                    size_t c = 0;
                    for (size_t i = 0; i < m; ++i)
                        for (size_t j = i + 1; j < m; ++j, ++c)
                            if (hb & (1u << c)) ah[i * m + j] = ah[j * m + i] = 1.0;
                    auto hidden = HiddenGraph::with_fixed_adjacency(
                        Tensor::from(ah, {m, m}), Tensor::full({m, 1}, 1.0));
                    Tensor at = Tensor::from(a, {n, n});
                    Tensor ones = Tensor::full({n, 1}, 1.0);
                    std::vector<double> s(n * m, 1.0);
                    for (size_t p = 0; p <= 3; ++p) {
                        ++cases;
                        double fast = walk_kernel(at, ones, hidden, p).value();
                        double oracle = brute_force_walk_count(a, n, ah, m, s, p);
                        if (std::abs(fast - oracle) > 1e-9) ++mismatches;
                    }
                }
            }
        }
    }
    std::cout << "kernel-check: " << cases << " cases, " << mismatches
              << " mismatches\n";
    return mismatches == 0 ? 0 : 1;
}

int run_gradcheck(const Config& cfg) {
    // A reduced instance keeps the finite-difference sweep tractable; the
    // computation path is the full model forward.
    ModelConfig mc = cfg.model;
    mc.d_model = 8;
    mc.d_emb = 8;
    mc.enc_layers = 1;
    mc.enc_heads = 2;
    mc.enc_ffn = 16;
    mc.dec_blocks = 2;
    mc.rw_embed_dim = 4;
    mc.global_graphs = 2;
    mc.global_nodes = 3;
    mc.local_graphs = 2;
    mc.local_nodes = 2;
    mc.max_len = 12;

    auto corpus = generate_corpus(ToyGrammar::standard(), 3, mc.max_len, cfg.train.seed);
    Vocab vocab = Vocab::build(corpus);
    mc.vocab_size = vocab.size();
    Rng rng(cfg.train.seed);
    Model m = Model::init(mc, rng);
    TrainConfig flags;

    NamedTensors named = m.parameters();
    std::vector<Tensor> params;
    for (auto& [n, t] : named) params.push_back(t);
    Tensor loss = forward_loss(m, corpus[0], vocab, flags).total;
    backward(loss);
    std::vector<std::vector<double>> analytic;
    for (auto& t : params) {
        if (!t.has_grad()) t.zero_grad();
        analytic.push_back(t.grad());
    }
    FdReport rep = finite_difference_check_params(
        [&]() { return forward_loss(m, corpus[0], vocab, flags).total.value(); },
        params, analytic, 1e-5);
    std::cout << "gradcheck: max rel err " << rep.max_rel_err << " over "
              << rep.checked << " coordinates (" << rep.skipped_nonsmooth
              << " skipped at kinks)\n";
    return rep.max_rel_err < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic spatial-temporal graph convolutional decoder"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string corpus_path, out_path, out_dir, checkpoint_path;
    size_t synth_n = 1000;
    size_t beam = 0;
    bool forced_reference = false, held_out_only = false;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic bilingual corpus");
    add_common(synth, opts);
    synth->add_option("--out", out_path, "Output corpus file (JSONL)")->required();
    synth->add_option("--n", synth_n, "Number of sentence pairs");

    auto* train_cmd = app.add_subcommand("train", "Train a model on a corpus");
    add_common(train_cmd, opts);
    train_cmd->add_option("--corpus", corpus_path, "Training corpus")->required();
    train_cmd->add_option("--out-dir", out_dir, "Directory for checkpoints and metrics")
        ->required();

    auto* decode_cmd = app.add_subcommand("decode", "Decode a corpus with a checkpoint");
    add_common(decode_cmd, opts);
    decode_cmd->add_option("--checkpoint", checkpoint_path)->required();
    decode_cmd->add_option("--corpus", corpus_path)->required();
    decode_cmd->add_option("--out", out_path, "Decode output (JSONL)")->required();
    decode_cmd->add_option("--beam", beam, "Beam size override");

    auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a corpus");
    add_common(eval_cmd, opts);
    eval_cmd->add_option("--checkpoint", checkpoint_path)->required();
    eval_cmd->add_option("--corpus", corpus_path)->required();
    eval_cmd->add_option("--out", out_path, "Report file (JSON)")->required();
    eval_cmd->add_option("--beam", beam, "Beam size override");
    eval_cmd->add_flag("--forced-reference", forced_reference,
                       "Force gold target tokens and score graphs only");
    eval_cmd->add_flag("--held-out", held_out_only,
                       "Evaluate only the final tenth of the corpus");

    auto* gradcheck_cmd =
        app.add_subcommand("gradcheck", "Finite-difference gradient audit");
    add_common(gradcheck_cmd, opts);

    auto* kernel_cmd = app.add_subcommand(
        "kernel-check", "Exhaustive walk-kernel oracle comparison");
    add_common(kernel_cmd, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            Config cfg = resolve_config(opts);
            auto corpus = generate_corpus(ToyGrammar::standard(), synth_n,
                                          cfg.model.max_len, cfg.train.seed);
            write_corpus(out_path, corpus);
            std::cout << "wrote " << corpus.size() << " examples to " << out_path
                      << "\n";
        } else if (train_cmd->parsed()) {
            Config cfg = resolve_config(opts);
            auto corpus = read_corpus(corpus_path);
            Vocab vocab = Vocab::build(corpus);
            Model m = load_model(cfg, vocab, "");
            auto history = train(m, corpus, vocab, cfg.train, out_dir);
            if (!history.empty())
                std::cout << "final epoch ce " << history.back().ce << " graph "
                          << history.back().graph << "\n";
        } else if (decode_cmd->parsed()) {
            Config cfg = resolve_config(opts);
            if (beam > 0) cfg.train.beam_size = beam;
            auto corpus = read_corpus(corpus_path);
            Vocab vocab = Vocab::build(corpus);
            Model m = load_model(cfg, vocab, checkpoint_path);
            std::string lines;  // buffered so a mid-corpus failure leaves no file
            for (const auto& ex : corpus) {
                EncoderOutput enc =
                    encode(vocab.ids(ex.src), ex.src_heads, m.enc, m.bank,
                           !(cfg.train.no_random_walk || cfg.train.no_source_walk));
                DecodeResult res =
                    cfg.train.beam_size > 1
                        ? beam_decode(m, enc, cfg.train.beam_size, m.cfg.max_len,
                                      cfg.train)
                        : greedy_decode(m, enc, m.cfg.max_len, cfg.train);
                lines += decode_record(res, vocab).dump();
                lines += "\n";
            }
            std::ofstream out(out_path);
            if (!out) throw std::runtime_error("cannot write " + out_path);
            out << lines;
            std::cout << "decoded " << corpus.size() << " sentences to " << out_path
                      << "\n";
        } else if (eval_cmd->parsed()) {
            Config cfg = resolve_config(opts);
            if (beam > 0) cfg.train.beam_size = beam;
            auto corpus = read_corpus(corpus_path);
            Vocab vocab = Vocab::build(corpus);
            Model m = load_model(cfg, vocab, checkpoint_path);
            std::vector<CorpusExample> subset = corpus;
            if (held_out_only) {
                std::vector<CorpusExample> train_part;
                split_corpus(corpus, train_part, subset);
            }
            EvalReport rep = evaluate(m, subset, vocab, cfg.train.beam_size, cfg.train,
                                      forced_reference);
            std::ofstream out(out_path);
            if (!out) throw std::runtime_error("cannot write " + out_path);
            out << rep.to_json() << "\n";
            std::cout << "exact_match " << rep.exact_match << " bleu4 " << rep.bleu
                      << " uas " << rep.uas << "\n";
        } else if (gradcheck_cmd->parsed()) {
            return run_gradcheck(resolve_config(opts));
        } else if (kernel_cmd->parsed()) {
            resolve_config(opts);
            return run_kernel_check();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
