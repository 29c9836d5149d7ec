#pragma once

#include <string>
#include <vector>

#include "stgcd/decoder.hpp"
#include "stgcd/grammar.hpp"

namespace stgcd {

double uas(const std::vector<int>& pred_heads, const std::vector<int>& gold_heads);

// Corpus-level BLEU with uniform 1..4-gram weights and brevity penalty.
double bleu4(const std::vector<std::vector<std::string>>& hypotheses,
             const std::vector<std::vector<std::string>>& references,
             bool smooth = false);

struct SentenceRecord {
    std::vector<std::string> tokens;
    std::vector<int> heads;
    double uas = 0.0;
    bool exact = false;
    double logprob = 0.0;
};

struct EvalReport {
    double exact_match = 0.0;
    double bleu = 0.0;
    double uas = 0.0;
    std::vector<SentenceRecord> records;

    std::string to_json() const;
};

// Decodes every example and scores tokens and graphs. In forced-reference
// mode the gold target tokens are pushed through the decoder and only the
// produced graphs are scored.
EvalReport evaluate(const Model& m, const std::vector<CorpusExample>& corpus,
                    const Vocab& vocab, size_t beam, const TrainConfig& flags,
                    bool forced_reference = false);

}  // namespace stgcd
