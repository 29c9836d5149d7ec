#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

// Dense 64-bit tensors with reverse-mode differentiation. Operations build a
// shared-pointer graph of nodes; backward() replays adjoints in reverse
// topological order. Recording is skipped when no input participates in
// gradients or while a NoGradGuard is active.

namespace stgcd {

class Tensor;

namespace detail {

struct Node {
    std::vector<size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;          // lazily sized on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;  // pulls from this->grad into parents

    size_t size() const {
        size_t n = 1;
        for (size_t d : shape) n *= d;
        return n;
    }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

bool grad_enabled();

}  // namespace detail

// Disables tape recording for its lifetime (decode-time forward passes).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

class Tensor {
public:
    Tensor() : node_(std::make_shared<detail::Node>()) {}

    static Tensor zeros(std::vector<size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<size_t> shape, double value,
                       bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor from(std::vector<double> data, std::vector<size_t> shape,
                       bool requires_grad = false);
    static Tensor identity(size_t n);

    const std::vector<size_t>& shape() const { return node_->shape; }
    size_t size() const { return node_->size(); }
    size_t rank() const { return node_->shape.size(); }
    size_t rows() const;
    size_t cols() const;

    const std::vector<double>& data() const { return node_->data; }
    std::vector<double>& mutable_data() { return node_->data; }

    double value() const;                   // scalar tensors only
    double at(size_t i) const { return node_->data[i]; }
    double at(size_t r, size_t c) const;

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    const std::vector<double>& grad() const { return node_->grad; }
    void zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

    // Value copy detached from the tape.
    Tensor detach() const;
    bool same_node(const Tensor& other) const { return node_ == other.node_; }

    bool all_finite() const;
    std::string shape_str() const;

    std::shared_ptr<detail::Node> node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

// Ordered replay of the operations reachable from a loss node. Backward can
// run repeatedly without re-recording; each run starts from zeroed adjoints.
class ComputationRecord {
public:
    explicit ComputationRecord(const Tensor& loss);
    void backward();
    size_t node_count() const { return order_.size(); }

private:
    std::shared_ptr<detail::Node> root_;
    std::vector<std::shared_ptr<detail::Node>> order_;
};

// Runs one backward pass from a scalar loss, accumulating into .grad of every
// reachable requires_grad tensor (previous grads are cleared first).
void backward(const Tensor& loss);

// ---- primitives ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);       // elementwise
Tensor scalar_mul(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor concat_cols(const Tensor& a, const Tensor& b);  // along last axis
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor sigmoid(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor log_t(const Tensor& a);
Tensor rsqrt(const Tensor& a);

// Row softmax restricted to mask!=0 entries; every row needs support.
Tensor softmax_masked(const Tensor& logits, const Tensor& mask);
Tensor softmax_rows(const Tensor& logits);

Tensor mean_axis(const Tensor& a, size_t axis);     // 2-D, axis 0 or 1
Tensor sum_all(const Tensor& a);
Tensor matrix_power(const Tensor& a, size_t p);     // repeated multiplication
Tensor kron(const Tensor& a, const Tensor& b);
Tensor embedding(const Tensor& table, const std::vector<int>& ids);
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor add_rowvec(const Tensor& m, const Tensor& v);

Tensor reshape(const Tensor& a, std::vector<size_t> shape);
Tensor slice_rows(const Tensor& a, size_t begin, size_t end);
Tensor row(const Tensor& a, size_t r);
// Embeds a matrix into the top-left corner of a larger zero matrix.
Tensor pad_matrix(const Tensor& a, size_t rows, size_t cols);
Tensor rows_scale(const Tensor& a, const Tensor& v);  // a[i][j] * v[i]
Tensor cols_scale(const Tensor& a, const Tensor& v);  // a[i][j] * v[j]
Tensor outer(const Tensor& u, const Tensor& v);

// -log softmax(logits)[target]; logits is a length-V vector.
Tensor cross_entropy(const Tensor& logits, int target);
// Sum of elementwise smooth-L1 over a tensor (0.5x^2 inside |x|<=1).
Tensor smooth_l1_sum(const Tensor& x);
// Row-wise layer normalization with gain/bias vectors.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
// Depthwise dilated causal convolution: seq is T x D, kernel h x D.
Tensor dilated_causal_conv(const Tensor& seq, const Tensor& kernel, size_t dilation);

// ---- initialization -------------------------------------------------------

class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}
    double uniform(double lo, double hi);
    uint64_t next_u64() { return gen_(); }
    std::mt19937_64& raw() { return gen_; }

private:
    std::mt19937_64 gen_;
};

// Uniform in +-sqrt(6/(fan_in+fan_out)).
Tensor glorot(size_t fan_in, size_t fan_out, Rng& rng, bool requires_grad = true);
Tensor uniform_init(std::vector<size_t> shape, double lo, double hi, Rng& rng,
                    bool requires_grad = true);

// ---- finite-difference oracle ---------------------------------------------

struct FdReport {
    double max_rel_err = 0.0;
    size_t checked = 0;
    size_t skipped_nonsmooth = 0;
    std::vector<double> rel_errs;  // one entry per checked coordinate

    double fraction_below(double tol) const;
};

// Central-difference check of d f / d point. The function must rebuild its
// graph from the given tensor on every call and return a scalar.
FdReport finite_difference_check(const std::function<Tensor(const Tensor&)>& f,
                                 const Tensor& point, double h);

// Same oracle against an already-computed analytic gradient for a set of
// shared parameters: eval() must recompute the loss value from the current
// parameter contents.
FdReport finite_difference_check_params(const std::function<double()>& eval,
                                        const std::vector<Tensor>& params,
                                        const std::vector<std::vector<double>>& analytic,
                                        double h);

}  // namespace stgcd
