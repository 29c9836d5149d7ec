#include "stgcd/grammar.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>

namespace stgcd {

ToyGrammar ToyGrammar::standard() {
    ToyGrammar g;
    g.dets = {"the", "a", "every"};
    g.adjs = {"red", "small", "old", "quick"};
    g.nouns = {"dog", "cat", "bird", "tree", "house", "river"};
    g.verbs = {"sees", "likes", "follows", "finds", "passes"};
    return g;
}

std::string ToyGrammar::translate(const std::string& src_word) const {
    // Deterministic bijection: reversed word with a marker suffix.
    std::string t(src_word.rbegin(), src_word.rend());
    return t + "q";
}

Vocab Vocab::build(const std::vector<CorpusExample>& corpus) {
    std::set<std::string> words;
    for (const auto& ex : corpus) {
        words.insert(ex.src.begin(), ex.src.end());
        words.insert(ex.tgt.begin(), ex.tgt.end());
    }
    Vocab v;
    v.id_to_word = {"<bos>", "<eos>"};
    v.id_to_word.insert(v.id_to_word.end(), words.begin(), words.end());
    for (size_t i = 0; i < v.id_to_word.size(); ++i)
        v.word_to_id[v.id_to_word[i]] = static_cast<int>(i);
    return v;
}

int Vocab::id(const std::string& word) const {
    auto it = word_to_id.find(word);
    if (it == word_to_id.end())
        throw std::invalid_argument("word not in vocabulary: " + word);
    return it->second;
}

const std::string& Vocab::word(int id) const {
    if (id < 0 || static_cast<size_t>(id) >= id_to_word.size())
        throw std::invalid_argument("token id out of range: " + std::to_string(id));
    return id_to_word[static_cast<size_t>(id)];
}

std::vector<int> Vocab::ids(const std::vector<std::string>& words) const {
    std::vector<int> out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(id(w));
    return out;
}

std::vector<std::string> Vocab::words(const std::vector<int>& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int i : ids) out.push_back(word(i));
    return out;
}

namespace {

struct NounPhrase {
    std::vector<std::string> words;
    int noun_offset = 0;  // index of the head noun within the phrase
};

NounPhrase make_np(const ToyGrammar& g, std::mt19937_64& rng) {
    auto pick = [&rng](const std::vector<std::string>& v) {
        return v[std::uniform_int_distribution<size_t>(0, v.size() - 1)(rng)];
    };
    NounPhrase np;
    np.words.push_back(pick(g.dets));
    bool with_adj = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
    if (with_adj) np.words.push_back(pick(g.adjs));
    np.words.push_back(pick(g.nouns));
    np.noun_offset = static_cast<int>(np.words.size()) - 1;
    return np;
}

// Heads of an NP placed at `base`, every non-head word attaching to the noun.
void np_heads(const NounPhrase& np, int base, int noun_abs, std::vector<int>& heads) {
    for (size_t i = 0; i < np.words.size(); ++i) {
        int abs = base + static_cast<int>(i);
        heads.push_back(abs == noun_abs ? -2 : noun_abs);  // -2 marks the noun slot
    }
}

}  // namespace

std::vector<CorpusExample> generate_corpus(const ToyGrammar& grammar, size_t n,
                                           size_t max_len, uint64_t seed) {
    if (n < 1) throw std::invalid_argument("generate_corpus: need n >= 1");
    if (max_len < 7)
        throw std::invalid_argument(
            "generate_corpus: max_len below the longest grammar sentence (7)");
    std::mt19937_64 rng(seed);
    std::vector<CorpusExample> out;
    out.reserve(n);
    for (size_t k = 0; k < n; ++k) {
        NounPhrase subj = make_np(grammar, rng);
        NounPhrase obj = make_np(grammar, rng);
        std::string verb =
            grammar.verbs[std::uniform_int_distribution<size_t>(
                0, grammar.verbs.size() - 1)(rng)];

        CorpusExample ex;
        // source: subj NP, verb, obj NP
        int subj_noun = subj.noun_offset;
        int verb_pos = static_cast<int>(subj.words.size());
        int obj_base = verb_pos + 1;
        int obj_noun = obj_base + obj.noun_offset;
        ex.src = subj.words;
        ex.src.push_back(verb);
        ex.src.insert(ex.src.end(), obj.words.begin(), obj.words.end());
        np_heads(subj, 0, subj_noun, ex.src_heads);
        ex.src_heads[subj_noun] = verb_pos;
        ex.src_heads.push_back(kRootHead);  // the verb
        np_heads(obj, obj_base, obj_noun, ex.src_heads);
        ex.src_heads[obj_noun] = verb_pos;

        // target: subj NP', obj NP', verb'
        int t_subj_noun = subj_noun;
        int t_obj_base = static_cast<int>(subj.words.size());
        int t_obj_noun = t_obj_base + obj.noun_offset;
        int t_verb = t_obj_base + static_cast<int>(obj.words.size());
        for (const auto& w : subj.words) ex.tgt.push_back(grammar.translate(w));
        for (const auto& w : obj.words) ex.tgt.push_back(grammar.translate(w));
        ex.tgt.push_back(grammar.translate(verb));
        np_heads(subj, 0, t_subj_noun, ex.tgt_heads);
        ex.tgt_heads[t_subj_noun] = t_verb;
        np_heads(obj, t_obj_base, t_obj_noun, ex.tgt_heads);
        ex.tgt_heads[t_obj_noun] = t_verb;
        ex.tgt_heads.push_back(kRootHead);  // the verb

        SyntacticGraph::from_heads(ex.src_heads).validate_gold();
        SyntacticGraph::from_heads(ex.tgt_heads).validate_gold();
        out.push_back(std::move(ex));
    }
    return out;
}

void split_corpus(const std::vector<CorpusExample>& corpus,
                  std::vector<CorpusExample>& train_out,
                  std::vector<CorpusExample>& held_out) {
    size_t held = corpus.size() / 10;
    size_t cut = corpus.size() - held;
    train_out.assign(corpus.begin(), corpus.begin() + cut);
    held_out.assign(corpus.begin() + cut, corpus.end());
}

}  // namespace stgcd
