#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "stgcd/graph.hpp"

namespace stgcd {

// Tiny bilingual grammar: S -> NP VP, NP -> Det (Adj) Noun, VP -> Verb NP.
// The target side is a word-for-word dictionary translation with the verb
// moved to final position; gold heads exist on both sides by construction.
struct ToyGrammar {
    std::vector<std::string> dets, adjs, nouns, verbs;

    static ToyGrammar standard();
    // Bijective dictionary lookup.
    std::string translate(const std::string& src_word) const;
};

struct Vocab {
    std::vector<std::string> id_to_word;  // 0 = <bos>, 1 = <eos>
    std::unordered_map<std::string, int> word_to_id;

    static Vocab build(const std::vector<CorpusExample>& corpus);
    int id(const std::string& word) const;
    const std::string& word(int id) const;
    size_t size() const { return id_to_word.size(); }
    std::vector<int> ids(const std::vector<std::string>& words) const;
    std::vector<std::string> words(const std::vector<int>& ids) const;
};

std::vector<CorpusExample> generate_corpus(const ToyGrammar& grammar, size_t n,
                                           size_t max_len, uint64_t seed);

// Last 10% of the corpus by index.
void split_corpus(const std::vector<CorpusExample>& corpus,
                  std::vector<CorpusExample>& train_out,
                  std::vector<CorpusExample>& held_out);

}  // namespace stgcd
