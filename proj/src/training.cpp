#include "stgcd/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace stgcd {

std::pair<double, double> smooth_l1(double x) {
    if (std::abs(x) <= 1.0) return {0.5 * x * x, x};
    return {std::abs(x) - 0.5, x > 0 ? 1.0 : -1.0};
}

Tensor joint_loss(const std::vector<Tensor>& logits_seq,
                  const std::vector<int>& target_tokens,
                  const std::vector<Tensor>& a_pred_seq, const SyntacticGraph& gold) {
    if (logits_seq.size() != target_tokens.size())
        throw std::invalid_argument("joint_loss: logits/targets length mismatch");
    if (a_pred_seq.size() > logits_seq.size() || a_pred_seq.size() > gold.n)
        throw std::invalid_argument("joint_loss: adjacency sequence too long");
    Tensor ce_sum;
    for (size_t i = 0; i < logits_seq.size(); ++i) {
        Tensor ce = cross_entropy(logits_seq[i], target_tokens[i]);
        ce_sum = (i == 0) ? ce : add(ce_sum, ce);
    }
    Tensor loss = scalar_mul(ce_sum, 1.0 / static_cast<double>(logits_seq.size()));
    for (size_t t = 1; t <= a_pred_seq.size(); ++t) {
        const Tensor& pred = a_pred_seq[t - 1];
        if (pred.rows() != t || pred.cols() != t)
            throw std::invalid_argument("joint_loss: step " + std::to_string(t) +
                                        " adjacency has shape " + pred.shape_str());
        Tensor star = Tensor::from(gold_prefix_adjacency(gold, t), {t, t});
        loss = add(loss, smooth_l1_sum(sub(pred, star)));
    }
    return loss;
}

namespace {

// Gold observed-block adjacency including the encoder node, used when the
// refinement recursion is teacher forced.
Tensor gold_observed(const SyntacticGraph& gold, size_t t) {
    auto prefix = gold_prefix_adjacency(gold, t);
    size_t n = t + 1;
    Tensor a = Tensor::zeros({n, n});
    auto& d = a.mutable_data();
    for (size_t i = 0; i < n; ++i) {
        d[i * n + i] = 1.0;
        d[i * n] = 1.0;
        d[i] = 1.0;
    }
    for (size_t i = 0; i < t; ++i)
        for (size_t j = 0; j < t; ++j)
            if (prefix[i * t + j] != 0.0) d[(i + 1) * n + (j + 1)] = 1.0;
    return a;
}

}  // namespace

LossParts forward_loss(const Model& m, const CorpusExample& ex, const Vocab& vocab,
                       const TrainConfig& cfg) {
    std::vector<int> src_ids = vocab.ids(ex.src);
    std::vector<int> tgt_ids = vocab.ids(ex.tgt);
    SyntacticGraph gold = SyntacticGraph::from_heads(ex.tgt_heads);
    size_t steps = tgt_ids.size() + 1;  // plus the end-of-sentence emission

    EncoderOutput enc = encode(src_ids, ex.src_heads, m.enc, m.bank,
                               !(cfg.no_random_walk || cfg.no_source_walk));
    DecoderState st = init_state(m, enc, steps, cfg);

    std::vector<Tensor> logits_seq, a_seq;
    std::vector<int> targets;
    int prev = kBosId;
    for (size_t t = 1; t <= steps; ++t) {
        StepOutput out = step(m, st, prev, cfg);
        logits_seq.push_back(out.logits);
        if (t <= tgt_ids.size()) {
            targets.push_back(tgt_ids[t - 1]);
            a_seq.push_back(out.adj_token_block);
            if (cfg.teacher_force_graphs) {
                Tensor forced = gold_observed(gold, t);
                for (auto& a : st.a) a = forced;
            }
            prev = tgt_ids[t - 1];
        } else {
            targets.push_back(kEosId);
        }
    }

    LossParts parts;
    parts.total = joint_loss(logits_seq, targets, a_seq, gold);
    {
        NoGradGuard ng;
        Tensor ce_only = joint_loss(logits_seq, targets, {}, gold);
        parts.ce = ce_only.value();
        parts.graph = parts.total.value() - parts.ce;
    }
    return parts;
}

Adam::Adam(std::vector<Tensor> params, const TrainConfig& cfg)
    : params_(std::move(params)),
      lr_(cfg.lr),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.eps),
      clip_(cfg.clip_norm) {
    for (const auto& p : params_) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

void Adam::apply() {
    double sq = 0.0;
    for (const auto& p : params_) {
        if (!p.has_grad()) continue;
        for (double g : p.grad()) sq += g * g;
    }
    last_norm_ = std::sqrt(sq);
    double scale = (clip_ > 0.0 && last_norm_ > clip_) ? clip_ / last_norm_ : 1.0;
    ++step_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = params_[k];
        if (!p.has_grad()) continue;
        auto& data = p.mutable_data();
        const auto& grad = p.grad();
        for (size_t i = 0; i < data.size(); ++i) {
            double g = grad[i] * scale;
            m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g;
            v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g * g;
            double mh = m_[k][i] / bc1;
            double vh = v_[k][i] / bc2;
            data[i] -= lr_ * mh / (std::sqrt(vh) + eps_);
        }
    }
}

std::vector<EpochMetrics> train(Model& m, const std::vector<CorpusExample>& corpus,
                                const Vocab& vocab, const TrainConfig& cfg,
                                const std::string& out_dir) {
    if (corpus.empty()) throw std::invalid_argument("train: empty corpus");
    NamedTensors named = m.parameters();
    std::vector<Tensor> params;
    for (auto& [name, t] : named) params.push_back(t);
    Adam opt(params, cfg);

    std::ofstream metrics_out;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        metrics_out.open(out_dir + "/metrics.jsonl");
        if (!metrics_out)
            throw std::runtime_error("train: cannot write metrics in " + out_dir);
    }

    std::vector<size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<EpochMetrics> history;

    for (size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        auto start = std::chrono::steady_clock::now();
        std::mt19937_64 shuffle_rng(cfg.seed + epoch);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double ce_sum = 0.0, graph_sum = 0.0;
        size_t seen = 0;
        while (seen < order.size()) {
            size_t batch = std::min(cfg.batch_size, order.size() - seen);
            opt.zero_grad();
            Tensor batch_loss;
            for (size_t k = 0; k < batch; ++k) {
                const CorpusExample& ex = corpus[order[seen + k]];
                LossParts parts = forward_loss(m, ex, vocab, cfg);
                if (!std::isfinite(parts.total.value()))
                    throw std::runtime_error(
                        "train: non-finite loss at epoch " + std::to_string(epoch) +
                        ", example " + std::to_string(order[seen + k]));
                batch_loss =
                    (k == 0) ? parts.total : add(batch_loss, parts.total);
                ce_sum += parts.ce;
                graph_sum += parts.graph;
            }
            ComputationRecord rec(scalar_mul(batch_loss, 1.0 / double(batch)));
            rec.backward();
            opt.apply();
            seen += batch;
        }
        auto elapsed = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - start)
                           .count();
        EpochMetrics em;
        em.epoch = epoch;
        em.ce = ce_sum / corpus.size();
        em.graph = graph_sum / corpus.size();
        em.seconds = elapsed;
        history.push_back(em);
        if (!out_dir.empty()) {
            nlohmann::json j;
            j["epoch"] = em.epoch;
            j["token_ce"] = em.ce;
            j["graph_loss"] = em.graph;
            j["seconds"] = em.seconds;
            metrics_out << j.dump() << "\n";
            metrics_out.flush();
            save_checkpoint(out_dir + "/epoch" + std::to_string(epoch) + ".ckpt",
                            named);
        }
    }
    return history;
}

}  // namespace stgcd
