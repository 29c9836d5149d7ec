#include "stgcd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace stgcd {

double uas(const std::vector<int>& pred_heads, const std::vector<int>& gold_heads) {
    if (pred_heads.size() != gold_heads.size())
        throw std::invalid_argument("uas: head array length mismatch");
    if (pred_heads.empty()) return 0.0;
    size_t hit = 0;
    for (size_t i = 0; i < pred_heads.size(); ++i)
        if (pred_heads[i] == gold_heads[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(pred_heads.size());
}

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, size_t> ngram_counts(const std::vector<std::string>& s, size_t n) {
    std::map<Ngram, size_t> counts;
    if (s.size() < n) return counts;
    for (size_t i = 0; i + n <= s.size(); ++i)
        ++counts[Ngram(s.begin() + i, s.begin() + i + n)];
    return counts;
}

}  // namespace

double bleu4(const std::vector<std::vector<std::string>>& hypotheses,
             const std::vector<std::vector<std::string>>& references, bool smooth) {
    if (hypotheses.empty() || hypotheses.size() != references.size())
        throw std::invalid_argument("bleu4: corpus empty or size mismatch");
    size_t hyp_len = 0, ref_len = 0;
    std::vector<size_t> matched(4, 0), total(4, 0);
    for (size_t k = 0; k < hypotheses.size(); ++k) {
        hyp_len += hypotheses[k].size();
        ref_len += references[k].size();
        for (size_t n = 1; n <= 4; ++n) {
            auto hc = ngram_counts(hypotheses[k], n);
            auto rc = ngram_counts(references[k], n);
            for (const auto& [gram, count] : hc) {
                total[n - 1] += count;
                auto it = rc.find(gram);
                if (it != rc.end()) matched[n - 1] += std::min(count, it->second);
            }
        }
    }
    double log_prec = 0.0;
    for (size_t n = 0; n < 4; ++n) {
        double num = static_cast<double>(matched[n]);
        double den = static_cast<double>(total[n]);
        if (smooth) {
            num += 1.0;
            den += 1.0;
        }
        if (num == 0.0 || den == 0.0) return 0.0;
        log_prec += 0.25 * std::log(num / den);
    }
    double bp = 1.0;
    if (hyp_len < ref_len && hyp_len > 0)
        bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
    if (hyp_len == 0) return 0.0;
    return bp * std::exp(log_prec);
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["exact_match"] = exact_match;
    j["bleu4"] = bleu;
    j["uas"] = uas;
    j["sentences"] = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json s;
        s["tokens"] = r.tokens;
        s["heads"] = r.heads;
        s["uas"] = r.uas;
        s["exact"] = r.exact;
        s["logprob"] = r.logprob;
        j["sentences"].push_back(std::move(s));
    }
    return j.dump(2);
}

EvalReport evaluate(const Model& m, const std::vector<CorpusExample>& corpus,
                    const Vocab& vocab, size_t beam, const TrainConfig& flags,
                    bool forced_reference) {
    if (corpus.empty()) throw std::invalid_argument("evaluate: empty corpus");
    EvalReport report;
    std::vector<std::vector<std::string>> hyps, refs;
    double uas_sum = 0.0;
    size_t exact = 0;
    NoGradGuard ng;
    for (const auto& ex : corpus) {
        std::vector<int> src_ids = vocab.ids(ex.src);
        EncoderOutput enc =
            encode(src_ids, ex.src_heads, m.enc, m.bank,
                   !(flags.no_random_walk || flags.no_source_walk));
        SentenceRecord rec;
        std::vector<int> pred_heads;
        if (forced_reference) {
            std::vector<int> tgt_ids = vocab.ids(ex.tgt);
            DecoderState st = init_state(m, enc, tgt_ids.size(), flags);
            int prev = kBosId;
            for (int id : tgt_ids) {
                StepOutput out = step(m, st, prev, flags);
                double mx = out.logits.at(0);
                for (double v : out.logits.data()) mx = std::max(mx, v);
                double z = 0.0;
                for (double v : out.logits.data()) z += std::exp(v - mx);
                rec.logprob += out.logits.at(static_cast<size_t>(id)) - mx - std::log(z);
                prev = id;
            }
            size_t n = tgt_ids.size();
            std::vector<double> adj(st.emitted.begin(), st.emitted.end());
            pred_heads = extract_heads(adj, n);
            rec.tokens = ex.tgt;
        } else {
            DecodeResult res =
                beam > 1 ? beam_decode(m, enc, beam, m.cfg.max_len, flags)
                         : greedy_decode(m, enc, m.cfg.max_len, flags);
            rec.tokens = vocab.words(res.tokens);
            rec.logprob = res.logprob;
            pred_heads = res.graph.heads;
        }
        rec.heads = pred_heads;
        bool exact_tokens = rec.tokens == ex.tgt;
        rec.exact = exact_tokens;
        if (exact_tokens) ++exact;
        // The model emits an undirected adjacency, so attachment is scored
        // against gold arcs: a token is correct when its extracted head is any
        // gold neighbor among its predecessors, or when both sides agree the
        // token has none (root sentinel). Gold vs gold still scores 1.
        if (pred_heads.size() == ex.tgt_heads.size()) {
            auto gold_g = SyntacticGraph::from_heads(ex.tgt_heads);
            std::vector<int> ref_heads = extract_heads(gold_g.adjacency, gold_g.n);
            size_t hit = 0;
            for (size_t i = 0; i < pred_heads.size(); ++i) {
                int h = pred_heads[i];
                if (h == kRootHead ? ref_heads[i] == kRootHead
                                   : gold_g.adj(i, static_cast<size_t>(h)) == 1.0)
                    ++hit;
            }
            rec.uas = static_cast<double>(hit) / pred_heads.size();
        } else {
            rec.uas = 0.0;
        }
        uas_sum += rec.uas;
        hyps.push_back(rec.tokens);
        refs.push_back(ex.tgt);
        report.records.push_back(std::move(rec));
    }
    report.exact_match = static_cast<double>(exact) / corpus.size();
    report.uas = uas_sum / corpus.size();
    report.bleu = bleu4(hyps, refs, true);
    return report;
}

}  // namespace stgcd
