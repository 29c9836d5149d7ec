#pragma once

#include <string>
#include <vector>

#include "stgcd/tensor.hpp"

namespace stgcd {

constexpr int kRootHead = -1;

// Token graph: symmetric weighted adjacency for the edge channel plus the
// directed head array kept separately for attachment scoring.
struct SyntacticGraph {
    size_t n = 0;
    std::vector<double> adjacency;  // n*n, row-major, symmetric
    std::vector<int> heads;         // per token; kRootHead marks the root

    double adj(size_t i, size_t j) const { return adjacency[i * n + j]; }
    double& adj(size_t i, size_t j) { return adjacency[i * n + j]; }

    // Zero-diagonal symmetric arc matrix from a head array.
    static SyntacticGraph from_heads(const std::vector<int>& heads);
    void validate_gold() const;  // throws on invariant violations
};

struct CorpusExample {
    std::vector<std::string> src;
    std::vector<std::string> tgt;
    std::vector<int> src_heads;
    std::vector<int> tgt_heads;
};

// D^{-1/2} (A+I) D^{-1/2} on a plain square matrix.
std::vector<double> normalize_adjacency(const std::vector<double>& a, size_t n);
// Differentiable variant used inside graph convolutions.
Tensor normalize_adjacency_t(const Tensor& a);

// Gold adjacency restricted to the first t tokens, with unit diagonal.
std::vector<double> gold_prefix_adjacency(const SyntacticGraph& gold, size_t t);

// Discretizes a predicted score matrix into heads: token 0 is the root, token
// i takes the argmax over predecessors scoring at least one half, ties toward
// the smaller index. A row with no such predecessor falls back to the root
// sentinel (covers tokens whose gold arcs all point forward).
std::vector<int> extract_heads(const std::vector<double>& score, size_t t);

std::vector<CorpusExample> read_corpus(const std::string& path);
void write_corpus(const std::string& path, const std::vector<CorpusExample>& examples);

}  // namespace stgcd
