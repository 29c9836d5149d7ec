#include "stgcd/graph.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace stgcd {

SyntacticGraph SyntacticGraph::from_heads(const std::vector<int>& heads) {
    SyntacticGraph g;
    g.n = heads.size();
    g.heads = heads;
    g.adjacency.assign(g.n * g.n, 0.0);
    for (size_t i = 0; i < g.n; ++i) {
        int h = heads[i];
        if (h == kRootHead) continue;
        if (h < 0 || static_cast<size_t>(h) >= g.n || static_cast<size_t>(h) == i)
            throw std::invalid_argument("invalid head index " + std::to_string(h) +
                                        " for token " + std::to_string(i));
        g.adj(i, static_cast<size_t>(h)) = 1.0;
        g.adj(static_cast<size_t>(h), i) = 1.0;
    }
    return g;
}

void SyntacticGraph::validate_gold() const {
    if (adjacency.size() != n * n || heads.size() != n)
        throw std::invalid_argument("graph field sizes inconsistent");
    size_t roots = 0;
    for (size_t i = 0; i < n; ++i) {
        if (heads[i] == kRootHead) {
            ++roots;
        } else if (heads[i] < 0 || static_cast<size_t>(heads[i]) >= n ||
                   static_cast<size_t>(heads[i]) == i) {
            throw std::invalid_argument("head out of range or self-loop at token " +
                                        std::to_string(i));
        } else if (adj(i, static_cast<size_t>(heads[i])) != 1.0) {
            throw std::invalid_argument("adjacency and heads inconsistent at token " +
                                        std::to_string(i));
        }
    }
    if (roots != 1)
        throw std::invalid_argument("gold graph must have exactly one root, found " +
                                    std::to_string(roots));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < i; ++j)
            if (std::abs(adj(i, j) - adj(j, i)) > 1e-12)
                throw std::invalid_argument("adjacency not symmetric");
}

std::vector<double> normalize_adjacency(const std::vector<double>& a, size_t n) {
    if (a.size() != n * n)
        throw std::invalid_argument("normalize_adjacency: matrix is not square");
    std::vector<double> inv_sqrt_deg(n);
    for (size_t i = 0; i < n; ++i) {
        double deg = 1.0;  // the added self-loop
        for (size_t j = 0; j < n; ++j) deg += a[i * n + j];
        inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
    }
    std::vector<double> out(n * n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) {
            double ahat = a[i * n + j] + (i == j ? 1.0 : 0.0);
            out[i * n + j] = inv_sqrt_deg[i] * ahat * inv_sqrt_deg[j];
        }
    return out;
}

Tensor normalize_adjacency_t(const Tensor& a) {
    if (a.rank() != 2 || a.rows() != a.cols())
        throw std::invalid_argument("normalize_adjacency: matrix is not square: " +
                                    a.shape_str());
    size_t n = a.rows();
    Tensor a_hat = add(a, Tensor::identity(n));
    Tensor inv_sqrt_deg = rsqrt(mean_axis(scalar_mul(a_hat, static_cast<double>(n)), 1));
    return rows_scale(cols_scale(a_hat, inv_sqrt_deg), inv_sqrt_deg);
}

std::vector<double> gold_prefix_adjacency(const SyntacticGraph& gold, size_t t) {
    if (t < 1 || t > gold.n)
        throw std::invalid_argument("gold_prefix_adjacency: step " + std::to_string(t) +
                                    " out of range for " + std::to_string(gold.n) +
                                    " tokens");
    std::vector<double> out(t * t, 0.0);
    for (size_t i = 0; i < t; ++i) {
        out[i * t + i] = 1.0;  // self-connections persist
        int h = gold.heads[i];
        if (h != kRootHead && static_cast<size_t>(h) < t) {
            out[i * t + static_cast<size_t>(h)] = 1.0;
            out[static_cast<size_t>(h) * t + i] = 1.0;
        }
    }
    return out;
}

std::vector<int> extract_heads(const std::vector<double>& score, size_t t) {
    if (score.size() != t * t)
        throw std::invalid_argument("extract_heads: score matrix size mismatch");
    std::vector<int> heads(t, kRootHead);
    for (size_t i = 1; i < t; ++i) {
        // Scores live in [0,1] with supervision toward {0,1}; anything below
        // one half counts as no edge, so tokens whose only arcs point forward
        // keep the root sentinel.
        double best = 0.5;
        int arg = kRootHead;
        for (size_t j = 0; j < i; ++j) {
            double s = score[i * t + j];
            if (s > best || (arg == kRootHead && s == 0.5)) {
                best = s;
                arg = static_cast<int>(j);
            }
        }
        heads[i] = arg;
    }
    return heads;
}

namespace {

std::vector<int> parse_heads(const nlohmann::json& arr, size_t n, const char* field,
                             size_t lineno) {
    std::vector<int> heads;
    heads.reserve(arr.size());
    for (const auto& v : arr) heads.push_back(v.get<int>());
    if (heads.size() != n)
        throw std::runtime_error("line " + std::to_string(lineno) + ": " + field +
                                 " length does not match tokens");
    for (size_t i = 0; i < heads.size(); ++i)
        if (heads[i] != kRootHead &&
            (heads[i] < 0 || static_cast<size_t>(heads[i]) >= n))
            throw std::runtime_error("line " + std::to_string(lineno) + ": " + field +
                                     " index out of range at token " + std::to_string(i));
    return heads;
}

}  // namespace

std::vector<CorpusExample> read_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);
    std::vector<CorpusExample> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw std::runtime_error("line " + std::to_string(lineno) +
                                     ": malformed corpus entry");
        CorpusExample ex;
        try {
            ex.src = j.at("src").get<std::vector<std::string>>();
            ex.tgt = j.at("tgt").get<std::vector<std::string>>();
            ex.src_heads = parse_heads(j.at("src_heads"), ex.src.size(), "src_heads", lineno);
            ex.tgt_heads = parse_heads(j.at("tgt_heads"), ex.tgt.size(), "tgt_heads", lineno);
        } catch (const nlohmann::json::exception&) {
            throw std::runtime_error("line " + std::to_string(lineno) +
                                     ": malformed corpus entry");
        }
        if (ex.src.empty() || ex.tgt.empty())
            throw std::runtime_error("line " + std::to_string(lineno) +
                                     ": empty token sequence");
        out.push_back(std::move(ex));
    }
    return out;
}

void write_corpus(const std::string& path, const std::vector<CorpusExample>& examples) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open corpus file for writing: " + path);
    for (const auto& ex : examples) {
        nlohmann::json j;
        j["src"] = ex.src;
        j["tgt"] = ex.tgt;
        j["src_heads"] = ex.src_heads;
        j["tgt_heads"] = ex.tgt_heads;
        out << j.dump() << "\n";
    }
    if (!out) throw std::runtime_error("write failure on corpus file: " + path);
}

}  // namespace stgcd
