#include "stgcd/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace stgcd {

namespace detail {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

}  // namespace detail

NoGradGuard::NoGradGuard() : prev_(detail::g_grad_enabled) {
    detail::g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { detail::g_grad_enabled = prev_; }

using detail::Node;
using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

// ---- Tensor basics ---------------------------------------------------------

Tensor Tensor::zeros(std::vector<size_t> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<size_t> shape, double value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data.assign(n->size(), value);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({value}, {1}, requires_grad);
}

Tensor Tensor::from(std::vector<double> data, std::vector<size_t> shape,
                    bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    if (n->data.size() != n->size())
        throw std::invalid_argument("Tensor::from: data length " +
                                    std::to_string(n->data.size()) +
                                    " does not match shape");
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::identity(size_t n) {
    Tensor t = zeros({n, n});
    for (size_t i = 0; i < n; ++i) t.mutable_data()[i * n + i] = 1.0;
    return t;
}

size_t Tensor::rows() const {
    if (rank() != 2) throw std::invalid_argument("rows(): tensor is not 2-D: " + shape_str());
    return node_->shape[0];
}

size_t Tensor::cols() const {
    if (rank() != 2) throw std::invalid_argument("cols(): tensor is not 2-D: " + shape_str());
    return node_->shape[1];
}

double Tensor::value() const {
    if (size() != 1) throw std::invalid_argument("value(): tensor is not scalar: " + shape_str());
    return node_->data[0];
}

double Tensor::at(size_t r, size_t c) const { return node_->data[r * cols() + c]; }

Tensor Tensor::detach() const {
    auto n = std::make_shared<Node>();
    n->shape = node_->shape;
    n->data = node_->data;
    n->requires_grad = false;
    return Tensor(std::move(n));
}

bool Tensor::all_finite() const {
    for (double v : node_->data)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < node_->shape.size(); ++i)
        os << (i ? "," : "") << node_->shape[i];
    os << "]";
    return os.str();
}

// ---- tape -------------------------------------------------------------------

namespace {

Tensor make_op(std::vector<size_t> shape, std::vector<double> data,
               std::vector<Tensor> inputs, std::function<void(Node&)> bw) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    bool track = detail::grad_enabled();
    bool any = false;
    if (track)
        for (const auto& t : inputs) any = any || t.requires_grad();
    if (track && any) {
        n->requires_grad = true;
        n->parents.reserve(inputs.size());
        for (const auto& t : inputs) n->parents.push_back(t.node());
        n->backward = std::move(bw);
    }
    return Tensor(std::move(n));
}

void check_matrix(const Tensor& t, const char* op) {
    if (t.rank() != 2)
        throw std::invalid_argument(std::string(op) + ": expected a matrix, got " +
                                    t.shape_str());
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
}

}  // namespace

ComputationRecord::ComputationRecord(const Tensor& loss) : root_(loss.node()) {
    if (loss.size() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got " +
                                    loss.shape_str());
    // Iterative post-order DFS: children (parents in tape terms) first.
    std::unordered_set<Node*> visited;
    std::vector<std::pair<std::shared_ptr<Node>, size_t>> stack;
    stack.emplace_back(root_, 0);
    visited.insert(root_.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            auto parent = node->parents[idx++];
            if (visited.insert(parent.get()).second) stack.emplace_back(parent, 0);
        } else {
            order_.push_back(node);
            stack.pop_back();
        }
    }
}

void ComputationRecord::backward() {
    for (auto& n : order_) n->grad.assign(n->data.size(), 0.0);
    root_->grad.assign(1, 1.0);
    for (auto it = order_.rbegin(); it != order_.rend(); ++it)
        if ((*it)->backward) (*it)->backward(**it);
}

void backward(const Tensor& loss) { ComputationRecord(loss).backward(); }

// ---- primitives -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_matrix(a, "matmul");
    check_matrix(b, "matmul");
    if (a.cols() != b.rows()) shape_error("matmul", a, b);
    size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(m * n);
    CMap am(a.data().data(), m, k), bm(b.data().data(), k, n);
    MMap(out.data(), m, n).noalias() = am * bm;
    return make_op({m, n}, std::move(out), {a, b}, [a, b, m, k, n](Node& self) {
        CMap g(self.grad.data(), m, n);
        CMap am2(a.node()->data.data(), m, k), bm2(b.node()->data.data(), k, n);
        if (a.requires_grad()) {
            a.node()->ensure_grad();
            MMap(a.node()->grad.data(), m, k).noalias() += g * bm2.transpose();
        }
        if (b.requires_grad()) {
            b.node()->ensure_grad();
            MMap(b.node()->grad.data(), k, n).noalias() += am2.transpose() * g;
        }
    });
}

Tensor transpose(const Tensor& a) {
    check_matrix(a, "transpose");
    size_t m = a.rows(), n = a.cols();
    std::vector<double> out(m * n);
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out[j * m + i] = a.data()[i * n + j];
    return make_op({n, m}, std::move(out), {a}, [a, m, n](Node& self) {
        if (!a.requires_grad()) return;
        a.node()->ensure_grad();
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j)
                a.node()->grad[i * n + j] += self.grad[j * m + i];
    });
}

namespace {

Tensor binary_elementwise(const char* name, const Tensor& a, const Tensor& b,
                          double (*fwd)(double, double),
                          void (*bwd)(double, double, double, double&, double&)) {
    if (a.shape() != b.shape()) shape_error(name, a, b);
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i], b.data()[i]);
    return make_op(a.shape(), std::move(out), {a, b}, [a, b, bwd](Node& self) {
        bool ga = a.requires_grad(), gb = b.requires_grad();
        if (ga) a.node()->ensure_grad();
        if (gb) b.node()->ensure_grad();
        for (size_t i = 0; i < self.data.size(); ++i) {
            double da = 0, db = 0;
            bwd(a.node()->data[i], b.node()->data[i], self.grad[i], da, db);
            if (ga) a.node()->grad[i] += da;
            if (gb) b.node()->grad[i] += db;
        }
    });
}

Tensor unary_elementwise(const Tensor& a, double (*fwd)(double),
                         double (*dfd_of_out)(double, double)) {
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i]);
    return make_op(a.shape(), std::move(out), {a}, [a, dfd_of_out](Node& self) {
        if (!a.requires_grad()) return;
        a.node()->ensure_grad();
        for (size_t i = 0; i < self.data.size(); ++i)
            a.node()->grad[i] +=
                self.grad[i] * dfd_of_out(a.node()->data[i], self.data[i]);
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double, double g, double& da, double& db) { da = g; db = g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double, double g, double& da, double& db) { da = g; db = -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double x, double y, double g, double& da, double& db) {
            da = g * y;
            db = g * x;
        });
}

Tensor scalar_mul(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
    return make_op(a.shape(), std::move(out), {a}, [a, c](Node& self) {
        if (!a.requires_grad()) return;
        a.node()->ensure_grad();
        for (size_t i = 0; i < self.data.size(); ++i)
            a.node()->grad[i] += self.grad[i] * c;
    });
}

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + c;
    return make_op(a.shape(), std::move(out), {a}, [a](Node& self) {
        if (!a.requires_grad()) return;
        a.node()->ensure_grad();
        for (size_t i = 0; i < self.data.size(); ++i)
            a.node()->grad[i] += self.grad[i];
    });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rank() == 1 && b.rank() == 1) {
        size_t n1 = a.size(), n2 = b.size();
        std::vector<double> out;
        out.reserve(n1 + n2);
        out.insert(out.end(), a.data().begin(), a.data().end());
        out.insert(out.end(), b.data().begin(), b.data().end());
        return make_op({n1 + n2}, std::move(out), {a, b}, [a, b, n1, n2](Node& self) {
            if (a.requires_grad()) {
                a.node()->ensure_grad();
                for (size_t i = 0; i < n1; ++i) a.node()->grad[i] += self.grad[i];
            }
            if (b.requires_grad()) {
                b.node()->ensure_grad();
                for (size_t i = 0; i < n2; ++i) b.node()->grad[i] += self.grad[n1 + i];
            }
        });
    }
    check_matrix(a, "concat_cols");
    check_matrix(b, "concat_cols");
    if (a.rows() != b.rows()) shape_error("concat_cols", a, b);
    size_t m = a.rows(), c1 = a.cols(), c2 = b.cols();
    std::vector<double> out(m * (c1 + c2));
    for (size_t i = 0; i < m; ++i) {
        std::copy_n(a.data().data() + i * c1, c1, out.data() + i * (c1 + c2));
        std::copy_n(b.data().data() + i * c2, c2, out.data() + i * (c1 + c2) + c1);
    }
    return make_op({m, c1 + c2}, std::move(out), {a, b}, [a, b, m, c1, c2](Node& self) {
        for (size_t i = 0; i < m; ++i) {
            if (a.requires_grad()) {
                a.node()->ensure_grad();
                for (size_t j = 0; j < c1; ++j)
                    a.node()->grad[i * c1 + j] += self.grad[i * (c1 + c2) + j];
            }
            if (b.requires_grad()) {
                b.node()->ensure_grad();
                for (size_t j = 0; j < c2; ++j)
                    b.node()->grad[i * c2 + j] += self.grad[i * (c1 + c2) + c1 + j];
            }
        }
    });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    check_matrix(a, "concat_rows");
    check_matrix(b, "concat_rows");
    if (a.cols() != b.cols()) shape_error("concat_rows", a, b);
    size_t r1 = a.rows(), r2 = b.rows(), c = a.cols();
    std::vector<double> out;
    out.reserve((r1 + r2) * c);
    out.insert(out.end(), a.data().begin(), a.data().end());
    out.insert(out.end(), b.data().begin(), b.data().end());
    return make_op({r1 + r2, c}, std::move(out), {a, b}, [a, b, r1, r2, c](Node& self) {
        if (a.requires_grad()) {
            a.node()->ensure_grad();
            for (size_t i = 0; i < r1 * c; ++i) a.node()->grad[i] += self.grad[i];
        }
        if (b.requires_grad()) {
            b.node()->ensure_grad();
            for (size_t i = 0; i < r2 * c; ++i)
                b.node()->grad[i] += self.grad[r1 * c + i];
        }
    });
}

Tensor sigmoid(const Tensor& a) {
    return unary_elementwise(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_t(const Tensor& a) {
    return unary_elementwise(a, [](double x) { return std::tanh(x); },
                             [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
    return unary_elementwise(a, [](double x) { return x > 0 ? x : 0.0; },
                             [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) {
        double x = a.data()[i];
        out[i] = x > 0 ? x : slope * x;
    }
    return make_op(a.shape(), std::move(out), {a}, [a, slope](Node& self) {
        if (!a.requires_grad()) return;
        a.node()->ensure_grad();
        for (size_t i = 0; i < self.data.size(); ++i)
            a.node()->grad[i] +=
                self.grad[i] * (a.node()->data[i] > 0 ? 1.0 : slope);
    });
}

Tensor log_t(const Tensor& a) {
    return unary_elementwise(a, [](double x) { return std::log(x); },
                             [](double x, double) { return 1.0 / x; });
}

Tensor rsqrt(const Tensor& a) {
    return unary_elementwise(
        a, [](double x) { return 1.0 / std::sqrt(x); },
        [](double x, double y) { return -0.5 * y / x; });
}

Tensor softmax_masked(const Tensor& logits, const Tensor& mask) {
    check_matrix(logits, "softmax_masked");
    if (logits.shape() != mask.shape()) shape_error("softmax_masked", logits, mask);
    size_t m = logits.rows(), n = logits.cols();
    std::vector<double> out(m * n, 0.0);
    for (size_t i = 0; i < m; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        size_t support = 0;
        for (size_t j = 0; j < n; ++j)
            if (mask.data()[i * n + j] != 0.0) {
                mx = std::max(mx, logits.data()[i * n + j]);
                ++support;
            }
        if (support == 0)
            throw std::invalid_argument("softmax_masked: row " + std::to_string(i) +
                                        " has empty support");
        double z = 0.0;
        for (size_t j = 0; j < n; ++j)
            if (mask.data()[i * n + j] != 0.0) {
                out[i * n + j] = std::exp(logits.data()[i * n + j] - mx);
                z += out[i * n + j];
            }
        for (size_t j = 0; j < n; ++j) out[i * n + j] /= z;
    }
    return make_op(logits.shape(), std::move(out), {logits, mask},
                   [logits, mask, m, n](Node& self) {
                       if (!logits.requires_grad()) return;
                       logits.node()->ensure_grad();
                       for (size_t i = 0; i < m; ++i) {
                           double dot = 0.0;
                           for (size_t j = 0; j < n; ++j)
                               dot += self.grad[i * n + j] * self.data[i * n + j];
                           for (size_t j = 0; j < n; ++j)
                               if (mask.node()->data[i * n + j] != 0.0)
                                   logits.node()->grad[i * n + j] +=
                                       self.data[i * n + j] *
                                       (self.grad[i * n + j] - dot);
                       }
                   });
}

Tensor softmax_rows(const Tensor& logits) {
    return softmax_masked(logits, Tensor::full(logits.shape(), 1.0));
}

Tensor mean_axis(const Tensor& a, size_t axis) {
    check_matrix(a, "mean_axis");
    size_t m = a.rows(), n = a.cols();
    if (axis == 0) {
        std::vector<double> out(n, 0.0);
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j) out[j] += a.data()[i * n + j];
        for (size_t j = 0; j < n; ++j) out[j] /= static_cast<double>(m);
        return make_op({n}, std::move(out), {a}, [a, m, n](Node& self) {
            if (!a.requires_grad()) return;
            a.node()->ensure_grad();
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < n; ++j)
                    a.node()->grad[i * n + j] += self.grad[j] / static_cast<double>(m);
        });
    }
    if (axis != 1) throw std::invalid_argument("mean_axis: axis must be 0 or 1");
    std::vector<double> out(m, 0.0);
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < n; ++j) out[i] += a.data()[i * n + j];
        out[i] /= static_cast<double>(n);
    }
    return make_op({m}, std::move(out), {a}, [a, m, n](Node& self) {
        if (!a.requires_grad()) return;
        a.node()->ensure_grad();
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j)
                a.node()->grad[i * n + j] += self.grad[i] / static_cast<double>(n);
    });
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return make_op({1}, {s}, {a}, [a](Node& self) {
        if (!a.requires_grad()) return;
        a.node()->ensure_grad();
        for (size_t i = 0; i < a.node()->data.size(); ++i)
            a.node()->grad[i] += self.grad[0];
    });
}

Tensor matrix_power(const Tensor& a, size_t p) {
    check_matrix(a, "matrix_power");
    if (a.rows() != a.cols())
        throw std::invalid_argument("matrix_power: matrix not square: " + a.shape_str());
    Tensor out = Tensor::identity(a.rows());
    for (size_t i = 0; i < p; ++i) out = matmul(out, a);
    return out;
}

Tensor kron(const Tensor& a, const Tensor& b) {
    check_matrix(a, "kron");
    check_matrix(b, "kron");
    size_t m = a.rows(), n = a.cols(), p = b.rows(), q = b.cols();
    std::vector<double> out(m * p * n * q);
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) {
            double av = a.data()[i * n + j];
            for (size_t k = 0; k < p; ++k)
                for (size_t l = 0; l < q; ++l)
                    out[(i * p + k) * n * q + j * q + l] = av * b.data()[k * q + l];
        }
    return make_op({m * p, n * q}, std::move(out), {a, b},
                   [a, b, m, n, p, q](Node& self) {
                       bool ga = a.requires_grad(), gb = b.requires_grad();
                       if (ga) a.node()->ensure_grad();
                       if (gb) b.node()->ensure_grad();
                       for (size_t i = 0; i < m; ++i)
                           for (size_t j = 0; j < n; ++j)
                               for (size_t k = 0; k < p; ++k)
                                   for (size_t l = 0; l < q; ++l) {
                                       double g = self.grad[(i * p + k) * n * q + j * q + l];
                                       if (ga)
                                           a.node()->grad[i * n + j] +=
                                               g * b.node()->data[k * q + l];
                                       if (gb)
                                           b.node()->grad[k * q + l] +=
                                               g * a.node()->data[i * n + j];
                                   }
                   });
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
    check_matrix(table, "embedding");
    size_t v = table.rows(), d = table.cols();
    std::vector<double> out(ids.size() * d);
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<size_t>(ids[i]) >= v)
            throw std::invalid_argument("embedding: id " + std::to_string(ids[i]) +
                                        " out of range for table rows " +
                                        std::to_string(v));
        std::copy_n(table.data().data() + static_cast<size_t>(ids[i]) * d, d,
                    out.data() + i * d);
    }
    return make_op({ids.size(), d}, std::move(out), {table}, [table, ids, d](Node& self) {
        if (!table.requires_grad()) return;
        table.node()->ensure_grad();
        for (size_t i = 0; i < ids.size(); ++i)
            for (size_t j = 0; j < d; ++j)
                table.node()->grad[static_cast<size_t>(ids[i]) * d + j] +=
                    self.grad[i * d + j];
    });
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
    check_matrix(m, "add_rowvec");
    if (v.rank() != 1 || v.size() != m.cols()) shape_error("add_rowvec", m, v);
    size_t r = m.rows(), c = m.cols();
    std::vector<double> out(r * c);
    for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) out[i * c + j] = m.data()[i * c + j] + v.data()[j];
    return make_op({r, c}, std::move(out), {m, v}, [m, v, r, c](Node& self) {
        if (m.requires_grad()) {
            m.node()->ensure_grad();
            for (size_t i = 0; i < r * c; ++i) m.node()->grad[i] += self.grad[i];
        }
        if (v.requires_grad()) {
            v.node()->ensure_grad();
            for (size_t i = 0; i < r; ++i)
                for (size_t j = 0; j < c; ++j) v.node()->grad[j] += self.grad[i * c + j];
        }
    });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add_rowvec(matmul(x, w), b);
}

Tensor reshape(const Tensor& a, std::vector<size_t> shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    if (n != a.size())
        throw std::invalid_argument("reshape: size mismatch " + a.shape_str());
    std::vector<double> out = a.data();
    return make_op(std::move(shape), std::move(out), {a}, [a](Node& self) {
        if (!a.requires_grad()) return;
        a.node()->ensure_grad();
        for (size_t i = 0; i < self.data.size(); ++i)
            a.node()->grad[i] += self.grad[i];
    });
}

Tensor slice_rows(const Tensor& a, size_t begin, size_t end) {
    check_matrix(a, "slice_rows");
    if (begin > end || end > a.rows())
        throw std::invalid_argument("slice_rows: range out of bounds for " + a.shape_str());
    size_t c = a.cols(), r = end - begin;
    std::vector<double> out(a.data().begin() + begin * c, a.data().begin() + end * c);
    return make_op({r, c}, std::move(out), {a}, [a, begin, r, c](Node& self) {
        if (!a.requires_grad()) return;
        a.node()->ensure_grad();
        for (size_t i = 0; i < r * c; ++i)
            a.node()->grad[begin * c + i] += self.grad[i];
    });
}

Tensor row(const Tensor& a, size_t r) {
    Tensor s = slice_rows(a, r, r + 1);
    return reshape(s, {a.cols()});
}

Tensor pad_matrix(const Tensor& a, size_t rows, size_t cols) {
    check_matrix(a, "pad_matrix");
    size_t r0 = a.rows(), c0 = a.cols();
    if (rows < r0 || cols < c0)
        throw std::invalid_argument("pad_matrix: target smaller than source " +
                                    a.shape_str());
    std::vector<double> out(rows * cols, 0.0);
    for (size_t i = 0; i < r0; ++i)
        std::copy_n(a.data().data() + i * c0, c0, out.data() + i * cols);
    return make_op({rows, cols}, std::move(out), {a}, [a, r0, c0, cols](Node& self) {
        if (!a.requires_grad()) return;
        a.node()->ensure_grad();
        for (size_t i = 0; i < r0; ++i)
            for (size_t j = 0; j < c0; ++j)
                a.node()->grad[i * c0 + j] += self.grad[i * cols + j];
    });
}

Tensor rows_scale(const Tensor& a, const Tensor& v) {
    check_matrix(a, "rows_scale");
    if (v.rank() != 1 || v.size() != a.rows()) shape_error("rows_scale", a, v);
    size_t r = a.rows(), c = a.cols();
    std::vector<double> out(r * c);
    for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) out[i * c + j] = a.data()[i * c + j] * v.data()[i];
    return make_op({r, c}, std::move(out), {a, v}, [a, v, r, c](Node& self) {
        bool ga = a.requires_grad(), gv = v.requires_grad();
        if (ga) a.node()->ensure_grad();
        if (gv) v.node()->ensure_grad();
        for (size_t i = 0; i < r; ++i)
            for (size_t j = 0; j < c; ++j) {
                double g = self.grad[i * c + j];
                if (ga) a.node()->grad[i * c + j] += g * v.node()->data[i];
                if (gv) v.node()->grad[i] += g * a.node()->data[i * c + j];
            }
    });
}

Tensor cols_scale(const Tensor& a, const Tensor& v) {
    check_matrix(a, "cols_scale");
    if (v.rank() != 1 || v.size() != a.cols()) shape_error("cols_scale", a, v);
    size_t r = a.rows(), c = a.cols();
    std::vector<double> out(r * c);
    for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) out[i * c + j] = a.data()[i * c + j] * v.data()[j];
    return make_op({r, c}, std::move(out), {a, v}, [a, v, r, c](Node& self) {
        bool ga = a.requires_grad(), gv = v.requires_grad();
        if (ga) a.node()->ensure_grad();
        if (gv) v.node()->ensure_grad();
        for (size_t i = 0; i < r; ++i)
            for (size_t j = 0; j < c; ++j) {
                double g = self.grad[i * c + j];
                if (ga) a.node()->grad[i * c + j] += g * v.node()->data[j];
                if (gv) v.node()->grad[j] += g * a.node()->data[i * c + j];
            }
    });
}

Tensor outer(const Tensor& u, const Tensor& v) {
    if (u.rank() != 1 || v.rank() != 1) shape_error("outer", u, v);
    return matmul(reshape(u, {u.size(), 1}), reshape(v, {1, v.size()}));
}

Tensor cross_entropy(const Tensor& logits, int target) {
    size_t n = logits.size();
    if (target < 0 || static_cast<size_t>(target) >= n)
        throw std::invalid_argument("cross_entropy: target " + std::to_string(target) +
                                    " out of range for " + std::to_string(n) + " classes");
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits.data()) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : logits.data()) z += std::exp(v - mx);
    double lse = mx + std::log(z);
    double loss = lse - logits.data()[static_cast<size_t>(target)];
    return make_op({1}, {loss}, {logits}, [logits, target, mx, z, n](Node& self) {
        if (!logits.requires_grad()) return;
        logits.node()->ensure_grad();
        double g = self.grad[0];
        for (size_t j = 0; j < n; ++j) {
            double p = std::exp(logits.node()->data[j] - mx) / z;
            logits.node()->grad[j] +=
                g * (p - (j == static_cast<size_t>(target) ? 1.0 : 0.0));
        }
    });
}

Tensor smooth_l1_sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data())
        s += std::abs(v) <= 1.0 ? 0.5 * v * v : std::abs(v) - 0.5;
    return make_op({1}, {s}, {x}, [x](Node& self) {
        if (!x.requires_grad()) return;
        x.node()->ensure_grad();
        double g = self.grad[0];
        for (size_t i = 0; i < x.node()->data.size(); ++i) {
            double v = x.node()->data[i];
            x.node()->grad[i] += g * (v > 1.0 ? 1.0 : (v < -1.0 ? -1.0 : v));
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    check_matrix(x, "layer_norm");
    size_t m = x.rows(), n = x.cols();
    if (gain.size() != n || bias.size() != n) shape_error("layer_norm", x, gain);
    constexpr double kEps = 1e-5;
    std::vector<double> out(m * n), norm(m * n), inv_std(m);
    for (size_t i = 0; i < m; ++i) {
        double mean = 0.0;
        for (size_t j = 0; j < n; ++j) mean += x.data()[i * n + j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (size_t j = 0; j < n; ++j) {
            double d = x.data()[i * n + j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        inv_std[i] = 1.0 / std::sqrt(var + kEps);
        for (size_t j = 0; j < n; ++j) {
            norm[i * n + j] = (x.data()[i * n + j] - mean) * inv_std[i];
            out[i * n + j] = gain.data()[j] * norm[i * n + j] + bias.data()[j];
        }
    }
    return make_op({m, n}, std::move(out), {x, gain, bias},
                   [x, gain, bias, m, n, norm, inv_std](Node& self) {
                       bool gx = x.requires_grad(), gg = gain.requires_grad(),
                            gb = bias.requires_grad();
                       if (gx) x.node()->ensure_grad();
                       if (gg) gain.node()->ensure_grad();
                       if (gb) bias.node()->ensure_grad();
                       for (size_t i = 0; i < m; ++i) {
                           double sum_gh = 0.0, sum_ghn = 0.0;
                           for (size_t j = 0; j < n; ++j) {
                               double gh = self.grad[i * n + j] * gain.node()->data[j];
                               sum_gh += gh;
                               sum_ghn += gh * norm[i * n + j];
                               if (gg)
                                   gain.node()->grad[j] +=
                                       self.grad[i * n + j] * norm[i * n + j];
                               if (gb) bias.node()->grad[j] += self.grad[i * n + j];
                           }
                           if (!gx) continue;
                           double dn = static_cast<double>(n);
                           for (size_t j = 0; j < n; ++j) {
                               double gh = self.grad[i * n + j] * gain.node()->data[j];
                               x.node()->grad[i * n + j] +=
                                   inv_std[i] *
                                   (gh - sum_gh / dn - norm[i * n + j] * sum_ghn / dn);
                           }
                       }
                   });
}

Tensor dilated_causal_conv(const Tensor& seq, const Tensor& kernel, size_t dilation) {
    check_matrix(seq, "dilated_causal_conv");
    check_matrix(kernel, "dilated_causal_conv");
    if (dilation < 1)
        throw std::invalid_argument("dilated_causal_conv: dilation must be >= 1");
    if (kernel.cols() != seq.cols()) shape_error("dilated_causal_conv", seq, kernel);
    size_t t_len = seq.rows(), d = seq.cols(), h = kernel.rows();
    std::vector<double> out(t_len * d, 0.0);
    for (size_t t = 0; t < t_len; ++t)
        for (size_t i = 0; i < h; ++i) {
            if (t < dilation * i) break;
            size_t src = t - dilation * i;
            for (size_t c = 0; c < d; ++c)
                out[t * d + c] += kernel.data()[i * d + c] * seq.data()[src * d + c];
        }
    return make_op({t_len, d}, std::move(out), {seq, kernel},
                   [seq, kernel, t_len, d, h, dilation](Node& self) {
                       bool gs = seq.requires_grad(), gk = kernel.requires_grad();
                       if (gs) seq.node()->ensure_grad();
                       if (gk) kernel.node()->ensure_grad();
                       for (size_t t = 0; t < t_len; ++t)
                           for (size_t i = 0; i < h; ++i) {
                               if (t < dilation * i) break;
                               size_t src = t - dilation * i;
                               for (size_t c = 0; c < d; ++c) {
                                   double g = self.grad[t * d + c];
                                   if (gs)
                                       seq.node()->grad[src * d + c] +=
                                           g * kernel.node()->data[i * d + c];
                                   if (gk)
                                       kernel.node()->grad[i * d + c] +=
                                           g * seq.node()->data[src * d + c];
                               }
                           }
                   });
}

// ---- initialization ---------------------------------------------------------

double Rng::uniform(double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    return dist(gen_);
}

Tensor glorot(size_t fan_in, size_t fan_out, Rng& rng, bool requires_grad) {
    double b = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return uniform_init({fan_in, fan_out}, -b, b, rng, requires_grad);
}

Tensor uniform_init(std::vector<size_t> shape, double lo, double hi, Rng& rng,
                    bool requires_grad) {
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (double& v : t.mutable_data()) v = rng.uniform(lo, hi);
    return t;
}

// ---- finite differences -------------------------------------------------------

namespace {

// Forward/backward one-sided estimates that disagree badly flag a kink.
bool nonsmooth(double fp, double f0, double fm, double h) {
    double fwd = (fp - f0) / h, bwd = (f0 - fm) / h;
    double scale = std::max({1.0, std::abs(fwd), std::abs(bwd)});
    return std::abs(fwd - bwd) > 0.05 * scale;
}

}  // namespace

FdReport finite_difference_check(const std::function<Tensor(const Tensor&)>& f,
                                 const Tensor& point, double h) {
    if (h <= 0) throw std::invalid_argument("finite_difference_check: h must be > 0");
    Tensor x = point.detach();
    x.node()->requires_grad = true;
    Tensor loss = f(x);
    if (!loss.all_finite())
        throw std::invalid_argument("finite_difference_check: non-finite function value");
    double f0 = loss.value();
    backward(loss);
    std::vector<double> analytic = x.has_grad()
                                       ? x.grad()
                                       : std::vector<double>(x.size(), 0.0);

    FdReport report;
    Tensor probe = point.detach();
    NoGradGuard ng;
    for (size_t i = 0; i < probe.size(); ++i) {
        double orig = probe.mutable_data()[i];
        probe.mutable_data()[i] = orig + h;
        double fp = f(probe).value();
        probe.mutable_data()[i] = orig - h;
        double fm = f(probe).value();
        probe.mutable_data()[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::invalid_argument(
                "finite_difference_check: non-finite function value");
        if (nonsmooth(fp, f0, fm, h)) {
            ++report.skipped_nonsmooth;
            continue;
        }
        double numeric = (fp - fm) / (2.0 * h);
        double rel = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
        report.max_rel_err = std::max(report.max_rel_err, rel);
        report.rel_errs.push_back(rel);
        ++report.checked;
    }
    return report;
}

double FdReport::fraction_below(double tol) const {
    if (rel_errs.empty()) return 1.0;
    size_t n = 0;
    for (double e : rel_errs)
        if (e < tol) ++n;
    return static_cast<double>(n) / static_cast<double>(rel_errs.size());
}

FdReport finite_difference_check_params(const std::function<double()>& eval,
                                        const std::vector<Tensor>& params,
                                        const std::vector<std::vector<double>>& analytic,
                                        double h) {
    if (h <= 0) throw std::invalid_argument("finite_difference_check_params: h must be > 0");
    FdReport report;
    double f0 = eval();
    for (size_t p = 0; p < params.size(); ++p) {
        Tensor t = params[p];
        const std::vector<double>& a = analytic[p];
        for (size_t i = 0; i < t.size(); ++i) {
            double orig = t.mutable_data()[i];
            t.mutable_data()[i] = orig + h;
            double fp = eval();
            t.mutable_data()[i] = orig - h;
            double fm = eval();
            t.mutable_data()[i] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw std::invalid_argument(
                    "finite_difference_check_params: non-finite function value");
            if (nonsmooth(fp, f0, fm, h)) {
                ++report.skipped_nonsmooth;
                continue;
            }
            double numeric = (fp - fm) / (2.0 * h);
            double rel = std::abs(a[i] - numeric) / std::max(1.0, std::abs(a[i]));
            report.max_rel_err = std::max(report.max_rel_err, rel);
            report.rel_errs.push_back(rel);
            ++report.checked;
        }
    }
    return report;
}

}  // namespace stgcd
