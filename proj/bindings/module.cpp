#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stgcd/metrics.hpp"
#include "stgcd/training.hpp"

namespace py = pybind11;
using namespace stgcd;

namespace {

Tensor matrix_from(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("empty matrix");
    size_t n = rows.size(), m = rows[0].size();
    std::vector<double> flat;
    flat.reserve(n * m);
    for (const auto& r : rows) {
        if (r.size() != m) throw std::invalid_argument("ragged matrix");
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return Tensor::from(std::move(flat), {n, m});
}

std::vector<std::vector<double>> matrix_to(const std::vector<double>& flat, size_t n) {
    std::vector<std::vector<double>> out(n, std::vector<double>(n));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) out[i][j] = flat[i * n + j];
    return out;
}

py::dict example_to_dict(const CorpusExample& ex) {
    py::dict d;
    d["src"] = ex.src;
    d["tgt"] = ex.tgt;
    d["src_heads"] = ex.src_heads;
    d["tgt_heads"] = ex.tgt_heads;
    return d;
}

CorpusExample example_from_dict(const py::dict& d) {
    CorpusExample ex;
    ex.src = d["src"].cast<std::vector<std::string>>();
    ex.tgt = d["tgt"].cast<std::vector<std::string>>();
    ex.src_heads = d["src_heads"].cast<std::vector<int>>();
    ex.tgt_heads = d["tgt_heads"].cast<std::vector<int>>();
    return ex;
}

// Model + vocabulary + training flags bundled for scripting use.
class Translator {
public:
    Translator(const std::vector<py::dict>& corpus, const std::string& preset,
               const std::map<std::string, std::string>& overrides, uint64_t seed) {
        cfg_ = Config::preset(preset);
        for (const auto& [k, v] : overrides) cfg_.set(k, v);
        cfg_.train.seed = seed;
        for (const auto& d : corpus) corpus_.push_back(example_from_dict(d));
        vocab_ = Vocab::build(corpus_);
        ModelConfig mc = cfg_.model;
        mc.vocab_size = vocab_.size();
        Rng rng(seed);
        model_ = Model::init(mc, rng);
    }

    std::vector<py::dict> train_epochs(size_t epochs) {
        TrainConfig tc = cfg_.train;
        tc.epochs = epochs;
        auto history = train(model_, corpus_, vocab_, tc, "");
        std::vector<py::dict> out;
        for (const auto& em : history) {
            py::dict d;
            d["epoch"] = em.epoch;
            d["token_ce"] = em.ce;
            d["graph_loss"] = em.graph;
            d["seconds"] = em.seconds;
            out.push_back(d);
        }
        return out;
    }

    double loss(const py::dict& example) const {
        NoGradGuard ng;
        return forward_loss(model_, example_from_dict(example), vocab_, cfg_.train)
            .total.value();
    }

    py::dict decode(const std::vector<std::string>& src, const std::vector<int>& heads,
                    size_t beam) const {
        NoGradGuard ng;
        EncoderOutput enc = encode(vocab_.ids(src), heads, model_.enc, model_.bank,
                                   !cfg_.train.no_random_walk);
        DecodeResult res = beam > 1
                               ? beam_decode(model_, enc, beam, model_.cfg.max_len,
                                             cfg_.train)
                               : greedy_decode(model_, enc, model_.cfg.max_len,
                                               cfg_.train);
        py::dict d;
        d["tokens"] = vocab_.words(res.tokens);
        d["heads"] = res.graph.heads;
        d["adjacency"] = matrix_to(res.adjacency, res.tokens.size());
        d["logprob"] = res.logprob;
        return d;
    }

    py::dict evaluate_corpus(size_t beam, bool forced_reference) const {
        EvalReport rep =
            evaluate(model_, corpus_, vocab_, beam, cfg_.train, forced_reference);
        py::dict d;
        d["exact_match"] = rep.exact_match;
        d["bleu"] = rep.bleu;
        d["uas"] = rep.uas;
        return d;
    }

    size_t parameter_count() const {
        size_t total = 0;
        for (const auto& [name, t] : model_.parameters()) total += t.size();
        return total;
    }

    size_t vocab_size() const { return vocab_.size(); }

private:
    Config cfg_;
    std::vector<CorpusExample> corpus_;
    Vocab vocab_;
    Model model_;
};

}  // namespace

PYBIND11_MODULE(_stgcd, m) {
    m.doc() = "Dynamic spatial-temporal graph convolutional decoder";

    m.def("uas", &uas, py::arg("pred_heads"), py::arg("gold_heads"));
    m.def("bleu4", &bleu4, py::arg("hypotheses"), py::arg("references"),
          py::arg("smooth") = false);
    m.def("smooth_l1", &smooth_l1, py::arg("x"),
          "Returns (value, derivative) of the piecewise penalty.");
    m.def(
        "normalize_adjacency",
        [](const std::vector<std::vector<double>>& a) {
            size_t n = a.size();
            Tensor t = matrix_from(a);
            return matrix_to(normalize_adjacency(t.data(), n), n);
        },
        py::arg("adjacency"));
    m.def(
        "extract_heads",
        [](const std::vector<std::vector<double>>& scores) {
            size_t n = scores.size();
            return extract_heads(matrix_from(scores).data(), n);
        },
        py::arg("scores"));
    m.def(
        "walk_kernel",
        [](const std::vector<std::vector<double>>& adjacency,
           const std::vector<std::vector<double>>& features,
           const std::vector<std::vector<double>>& hidden_adjacency,
           const std::vector<std::vector<double>>& hidden_embeddings, size_t p) {
            auto hidden = HiddenGraph::with_fixed_adjacency(
                matrix_from(hidden_adjacency), matrix_from(hidden_embeddings));
            NoGradGuard ng;
            return walk_kernel(matrix_from(adjacency), matrix_from(features), hidden, p)
                .value();
        },
        py::arg("adjacency"), py::arg("features"), py::arg("hidden_adjacency"),
        py::arg("hidden_embeddings"), py::arg("p"));
    m.def(
        "generate_corpus",
        [](size_t n, size_t max_len, uint64_t seed) {
            std::vector<py::dict> out;
            for (const auto& ex :
                 generate_corpus(ToyGrammar::standard(), n, max_len, seed))
                out.push_back(example_to_dict(ex));
            return out;
        },
        py::arg("n"), py::arg("max_len") = 12, py::arg("seed") = 1);

    py::class_<Translator>(m, "Translator")
        .def(py::init<const std::vector<py::dict>&, const std::string&,
                      const std::map<std::string, std::string>&, uint64_t>(),
             py::arg("corpus"), py::arg("preset") = "desk",
             py::arg("overrides") = std::map<std::string, std::string>{},
             py::arg("seed") = 1)
        .def("train", &Translator::train_epochs, py::arg("epochs"))
        .def("loss", &Translator::loss, py::arg("example"))
        .def("decode", &Translator::decode, py::arg("src"), py::arg("heads"),
             py::arg("beam") = 1)
        .def("evaluate", &Translator::evaluate_corpus, py::arg("beam") = 1,
             py::arg("forced_reference") = false)
        .def_property_readonly("parameter_count", &Translator::parameter_count)
        .def_property_readonly("vocab_size", &Translator::vocab_size);
}
