#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stgcd/decoder.hpp"
#include "stgcd/grammar.hpp"

namespace stgcd {

// Value and derivative of the smooth L1 penalty.
std::pair<double, double> smooth_l1(double x);

// CE averaged over tokens plus the smooth-L1 graph term summed over entries
// and steps. logits_seq has one entry per emitted token (including the
// end-of-sentence step, which carries no graph supervision).
Tensor joint_loss(const std::vector<Tensor>& logits_seq,
                  const std::vector<int>& target_tokens,
                  const std::vector<Tensor>& a_pred_seq, const SyntacticGraph& gold);

struct LossParts {
    Tensor total;
    double ce = 0.0;     // mean token cross-entropy
    double graph = 0.0;  // summed graph penalty
};

// Teacher-forced tokens, free-generated graphs (unless cfg asks otherwise).
LossParts forward_loss(const Model& m, const CorpusExample& ex, const Vocab& vocab,
                       const TrainConfig& cfg);

class Adam {
public:
    Adam(std::vector<Tensor> params, const TrainConfig& cfg);
    // Applies one update from the gradients currently stored on the
    // parameters, after global-norm clipping.
    void apply();
    void zero_grad();
    double last_grad_norm() const { return last_norm_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_, clip_;
    size_t step_ = 0;
    double last_norm_ = 0.0;
};

struct EpochMetrics {
    size_t epoch = 0;
    double ce = 0.0;
    double graph = 0.0;
    double seconds = 0.0;
};

// Full loop: per-epoch shuffling, batched gradient averaging, Adam updates,
// one checkpoint and one metrics line per epoch. out_dir may be empty to
// skip all file output.
std::vector<EpochMetrics> train(Model& m, const std::vector<CorpusExample>& corpus,
                                const Vocab& vocab, const TrainConfig& cfg,
                                const std::string& out_dir);

}  // namespace stgcd
