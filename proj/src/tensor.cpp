#include "p2f/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

#include "p2f/errors.hpp"
#include "p2f/special.hpp"

namespace p2f {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

std::size_t shape_product(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

NodePtr make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    return n;
}

Tensor make_op(Shape shape, std::vector<double> data, std::vector<NodePtr> parents,
               std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    for (const auto& p : parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return Tensor(std::move(n));
}

void ensure_grad(Node& n) {
    if (n.grad.size() != n.data.size()) n.grad.assign(n.data.size(), 0.0);
}

void accumulate(const NodePtr& p, std::size_t i, double v) {
    if (p->requires_grad) p->grad[i] += v;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

// Binary elementwise helper: out = f(a, b); backprop via analytic partials.
template <typename Fwd, typename DfA, typename DfB>
Tensor ewise2(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, DfA dfa, DfB dfb) {
    check_same_shape(a, b, name);
    const auto& ad = a.data();
    const auto& bd = b.data();
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < ad.size(); ++i) out[i] = fwd(ad[i], bd[i]);
    NodePtr an = a.node(), bn = b.node();
    return make_op(a.shape(), std::move(out), {an, bn}, [an, bn, dfa, dfb](Node& self) {
        for (std::size_t i = 0; i < self.data.size(); ++i) {
            const double g = self.grad[i];
            accumulate(an, i, g * dfa(an->data[i], bn->data[i]));
            accumulate(bn, i, g * dfb(an->data[i], bn->data[i]));
        }
    });
}

// Unary elementwise helper; derivative may be expressed via input and output.
template <typename Fwd, typename Df>
Tensor ewise1(const Tensor& a, Fwd fwd, Df df) {
    const auto& ad = a.data();
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < ad.size(); ++i) out[i] = fwd(ad[i]);
    NodePtr an = a.node();
    return make_op(a.shape(), std::move(out), {an}, [an, df](Node& self) {
        for (std::size_t i = 0; i < self.data.size(); ++i) {
            accumulate(an, i, self.grad[i] * df(an->data[i], self.data[i]));
        }
    });
}

double softplus_scalar(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid_scalar(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::size_t n = shape_product(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::size_t n = shape_product(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_product(shape) != data.size()) {
        throw DimensionError("from_data: shape " + shape_str(shape) + " does not match data length " +
                             std::to_string(data.size()));
    }
    return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor(make_leaf({1}, {value}, requires_grad));
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->data.size(); }
const std::vector<double>& Tensor::data() const { return node_->data; }
std::vector<double>& Tensor::raw_data() { return node_->data; }
bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->data.size(); }

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) throw EvaluationError("grad: no gradient present (run backward first)");
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

double Tensor::value() const {
    if (size() != 1) throw DimensionError("value: tensor is not scalar, shape " + shape_str(shape()));
    return node_->data[0];
}

double Tensor::at(std::size_t i) const { return node_->data.at(i); }

void Tensor::backward() const {
    if (!node_ || node_->data.size() != 1) {
        throw DimensionError("backward: root must be a scalar");
    }
    // Iterative post-order DFS; parents are visited before the node itself,
    // so iterating the order backwards propagates each node exactly once.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    struct Frame {
        Node* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({node_.get(), 0});
    seen.insert(node_.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            Node* p = f.node->parents[f.next_parent++].get();
            if (seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }
    for (Node* n : order) {
        if (n->requires_grad) {
            n->grad.assign(n->data.size(), 0.0);
        }
    }
    ensure_grad(*node_);
    node_->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->requires_grad) n->backprop(*n);
    }
}

Tensor add(const Tensor& a, const Tensor& b) {
    return ewise2(a, b, "add", [](double x, double y) { return x + y; },
                  [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return ewise2(a, b, "sub", [](double x, double y) { return x - y; },
                  [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return ewise2(a, b, "mul", [](double x, double y) { return x * y; },
                  [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    for (double v : b.data()) {
        if (v == 0.0) throw DomainError("div: zero denominator");
    }
    return ewise2(a, b, "div", [](double x, double y) { return x / y; },
                  [](double, double y) { return 1.0 / y; },
                  [](double x, double y) { return -x / (y * y); });
}

Tensor add_scalar(const Tensor& a, double s) {
    return ewise1(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
    return ewise1(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor log(const Tensor& a) {
    for (double v : a.data()) {
        if (!(v > 0.0)) throw DomainError("log: nonpositive argument " + std::to_string(v));
    }
    return ewise1(a, [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Tensor exp(const Tensor& a) {
    return ewise1(a, [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Tensor sigmoid(const Tensor& a) {
    return ewise1(a, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
    return ewise1(a, softplus_scalar, [](double x, double) { return sigmoid_scalar(x); });
}

Tensor lgamma(const Tensor& a) {
    for (double v : a.data()) {
        if (!(v > 0.0)) throw DomainError("lgamma: nonpositive argument " + std::to_string(v));
    }
    return ewise1(a, [](double x) { return special::lgamma(x); },
                  [](double x, double) { return special::digamma(x); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    return ewise1(a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
                  [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor relu(const Tensor& a) {
    return clamp(a, 0.0, std::numeric_limits<double>::infinity());
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    const auto& ad = a.data();
    const auto& bd = b.data();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ad[i * k + p];
            const double* brow = &bd[p * n];
            double* orow = &out[i * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    NodePtr an = a.node(), bn = b.node();
    return make_op({m, n}, std::move(out), {an, bn}, [an, bn, m, k, n](Node& self) {
        // dA = dC * B^T, dB = A^T * dC
        if (an->requires_grad) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    const double* grow = &self.grad[i * n];
                    const double* brow = &bn->data[p * n];
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    an->grad[i * k + p] += acc;
                }
            }
        }
        if (bn->requires_grad) {
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = &self.grad[i * n];
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = an->data[i * k + p];
                    double* brow = &bn->grad[p * n];
                    for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
                }
            }
        }
    });
}

Tensor softmax_lastaxis(const Tensor& a) {
    if (a.shape().empty()) throw DimensionError("softmax: rank-0 tensor");
    const std::size_t n = a.shape().back();
    const std::size_t rows = a.size() / n;
    const auto& ad = a.data();
    std::vector<double> out(ad.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = &ad[r * n];
        double* y = &out[r * n];
        double mx = x[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            y[j] = std::exp(x[j] - mx);
            z += y[j];
        }
        for (std::size_t j = 0; j < n; ++j) y[j] /= z;
    }
    NodePtr an = a.node();
    return make_op(a.shape(), std::move(out), {an}, [an, rows, n](Node& self) {
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = &self.data[r * n];
            const double* gy = &self.grad[r * n];
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += gy[j] * y[j];
            for (std::size_t j = 0; j < n; ++j) an->grad[r * n + j] += y[j] * (gy[j] - dot);
        }
    });
}

Tensor log_softmax_lastaxis(const Tensor& a) {
    if (a.shape().empty()) throw DimensionError("log_softmax: rank-0 tensor");
    const std::size_t n = a.shape().back();
    const std::size_t rows = a.size() / n;
    const auto& ad = a.data();
    std::vector<double> out(ad.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = &ad[r * n];
        double mx = x[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += std::exp(x[j] - mx);
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < n; ++j) out[r * n + j] = x[j] - lse;
    }
    NodePtr an = a.node();
    return make_op(a.shape(), std::move(out), {an}, [an, rows, n](Node& self) {
        for (std::size_t r = 0; r < rows; ++r) {
            const double* ly = &self.data[r * n];
            const double* gy = &self.grad[r * n];
            double gsum = 0.0;
            for (std::size_t j = 0; j < n; ++j) gsum += gy[j];
            for (std::size_t j = 0; j < n; ++j) {
                an->grad[r * n + j] += gy[j] - std::exp(ly[j]) * gsum;
            }
        }
    });
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    NodePtr an = a.node();
    return make_op({1}, {acc}, {an}, [an](Node& self) {
        const double g = self.grad[0];
        for (std::size_t i = 0; i < an->data.size(); ++i) an->grad[i] += g;
    });
}

Tensor mean(const Tensor& a) {
    const double inv = 1.0 / static_cast<double>(a.size());
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    NodePtr an = a.node();
    return make_op({1}, {acc * inv}, {an}, [an, inv](Node& self) {
        const double g = self.grad[0] * inv;
        for (std::size_t i = 0; i < an->data.size(); ++i) an->grad[i] += g;
    });
}

Tensor gather(const Tensor& a, const std::vector<std::size_t>& indices) {
    const auto& ad = a.data();
    std::vector<double> out(indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) {
        if (indices[j] >= ad.size()) {
            throw DimensionError("gather: index " + std::to_string(indices[j]) +
                                 " out of range for size " + std::to_string(ad.size()));
        }
        out[j] = ad[indices[j]];
    }
    NodePtr an = a.node();
    auto idx = indices;
    return make_op({indices.size()}, std::move(out), {an}, [an, idx](Node& self) {
        for (std::size_t j = 0; j < idx.size(); ++j) an->grad[idx[j]] += self.grad[j];
    });
}

Tensor broadcast_rows(const Tensor& v, std::size_t rows) {
    if (v.shape().size() != 1) throw DimensionError("broadcast_rows: expected rank-1 tensor");
    const std::size_t n = v.size();
    std::vector<double> out(rows * n);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy(v.data().begin(), v.data().end(), out.begin() + r * n);
    }
    NodePtr vn = v.node();
    return make_op({rows, n}, std::move(out), {vn}, [vn, rows, n](Node& self) {
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < n; ++j) vn->grad[j] += self.grad[r * n + j];
        }
    });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
    if (a.shape().size() != 2 || end > a.shape()[1] || begin >= end) {
        throw DimensionError("slice_cols: invalid column range [" + std::to_string(begin) + ", " +
                             std::to_string(end) + ") for shape " +
                             std::to_string(a.shape().empty() ? 0 : a.shape()[0]) + " rows");
    }
    const std::size_t m = a.shape()[0], n = a.shape()[1], k = end - begin;
    const auto& ad = a.data();
    std::vector<double> out(m * k);
    for (std::size_t i = 0; i < m; ++i) {
        std::copy(ad.begin() + i * n + begin, ad.begin() + i * n + end, out.begin() + i * k);
    }
    NodePtr an = a.node();
    return make_op({m, k}, std::move(out), {an}, [an, m, n, k, begin](Node& self) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < k; ++j) an->grad[i * n + begin + j] += self.grad[i * k + j];
        }
    });
}

Tensor conv3x3(const Tensor& input, const Tensor& weight, const Tensor& bias,
               std::size_t height, std::size_t width) {
    if (input.shape().size() != 2 || input.shape()[1] != height * width) {
        throw DimensionError("conv3x3: input shape " + shape_str(input.shape()) +
                             " does not match " + std::to_string(height) + "x" + std::to_string(width));
    }
    const std::size_t cin = input.shape()[0];
    if (weight.shape().size() != 2 || weight.shape()[1] != cin * 9) {
        throw DimensionError("conv3x3: weight shape " + shape_str(weight.shape()) +
                             " incompatible with " + std::to_string(cin) + " input channels");
    }
    const std::size_t cout = weight.shape()[0];
    if (bias.size() != cout) throw DimensionError("conv3x3: bias size mismatch");

    const auto& in = input.data();
    const auto& w = weight.data();
    const auto& b = bias.data();
    std::vector<double> out(cout * height * width);
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(height);
    const std::ptrdiff_t wd = static_cast<std::ptrdiff_t>(width);
    for (std::size_t co = 0; co < cout; ++co) {
        double* oplane = &out[co * height * width];
        for (std::size_t p = 0; p < height * width; ++p) oplane[p] = b[co];
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* iplane = &in[ci * height * width];
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const double wv = w[co * cin * 9 + ci * 9 + ky * 3 + kx];
                    if (wv == 0.0) continue;
                    const std::ptrdiff_t dy = ky - 1, dx = kx - 1;
                    const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
                    const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(h, h - dy);
                    const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
                    const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(wd, wd - dx);
                    for (std::ptrdiff_t y = y0; y < y1; ++y) {
                        const double* irow = &iplane[(y + dy) * wd + dx];
                        double* orow = &oplane[y * wd];
                        for (std::ptrdiff_t x = x0; x < x1; ++x) orow[x] += wv * irow[x];
                    }
                }
            }
        }
    }
    NodePtr in_n = input.node(), w_n = weight.node(), b_n = bias.node();
    return make_op({cout, height * width}, std::move(out), {in_n, w_n, b_n},
                   [in_n, w_n, b_n, cin, cout, h, wd](Node& self) {
        const std::size_t plane = static_cast<std::size_t>(h * wd);
        for (std::size_t co = 0; co < cout; ++co) {
            const double* gplane = &self.grad[co * plane];
            if (b_n->requires_grad) {
                double acc = 0.0;
                for (std::size_t p = 0; p < plane; ++p) acc += gplane[p];
                b_n->grad[co] += acc;
            }
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const double* iplane = &in_n->data[ci * plane];
                double* giplane = in_n->requires_grad ? &in_n->grad[ci * plane] : nullptr;
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        const std::size_t widx = co * cin * 9 + ci * 9 + ky * 3 + kx;
                        const double wv = w_n->data[widx];
                        const std::ptrdiff_t dy = ky - 1, dx = kx - 1;
                        const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
                        const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(h, h - dy);
                        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
                        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(wd, wd - dx);
                        double wacc = 0.0;
                        for (std::ptrdiff_t y = y0; y < y1; ++y) {
                            const double* grow = &gplane[y * wd];
                            const double* irow = &iplane[(y + dy) * wd + dx];
                            double* girow = giplane ? &giplane[(y + dy) * wd + dx] : nullptr;
                            for (std::ptrdiff_t x = x0; x < x1; ++x) {
                                wacc += grow[x] * irow[x];
                                if (girow) girow[x] += wv * grow[x];
                            }
                        }
                        if (w_n->requires_grad) w_n->grad[widx] += wacc;
                    }
                }
            }
        }
    });
}

Tensor avgpool2(const Tensor& input, std::size_t height, std::size_t width) {
    if (input.shape().size() != 2 || input.shape()[1] != height * width ||
        height % 2 != 0 || width % 2 != 0) {
        throw DimensionError("avgpool2: input shape " + shape_str(input.shape()) +
                             " does not match even " + std::to_string(height) + "x" +
                             std::to_string(width));
    }
    const std::size_t c = input.shape()[0];
    const std::size_t h2 = height / 2, w2 = width / 2;
    const auto& in = input.data();
    std::vector<double> out(c * h2 * w2);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* ip = &in[ch * height * width];
        double* op = &out[ch * h2 * w2];
        for (std::size_t y = 0; y < h2; ++y) {
            for (std::size_t x = 0; x < w2; ++x) {
                const std::size_t base = (2 * y) * width + 2 * x;
                op[y * w2 + x] = 0.25 * (ip[base] + ip[base + 1] + ip[base + width] +
                                         ip[base + width + 1]);
            }
        }
    }
    NodePtr in_n = input.node();
    return make_op({c, h2 * w2}, std::move(out), {in_n}, [in_n, c, height, width, h2, w2](Node& self) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* gp = &self.grad[ch * h2 * w2];
            double* gi = &in_n->grad[ch * height * width];
            for (std::size_t y = 0; y < h2; ++y) {
                for (std::size_t x = 0; x < w2; ++x) {
                    const double g = 0.25 * gp[y * w2 + x];
                    const std::size_t base = (2 * y) * width + 2 * x;
                    gi[base] += g;
                    gi[base + 1] += g;
                    gi[base + width] += g;
                    gi[base + width + 1] += g;
                }
            }
        }
    });
}

Tensor upsample2(const Tensor& input, std::size_t height, std::size_t width) {
    if (input.shape().size() != 2 || input.shape()[1] != height * width) {
        throw DimensionError("upsample2: input shape " + shape_str(input.shape()) +
                             " does not match " + std::to_string(height) + "x" + std::to_string(width));
    }
    const std::size_t c = input.shape()[0];
    const std::size_t h2 = height * 2, w2 = width * 2;
    const auto& in = input.data();
    std::vector<double> out(c * h2 * w2);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* ip = &in[ch * height * width];
        double* op = &out[ch * h2 * w2];
        for (std::size_t y = 0; y < h2; ++y) {
            const double* irow = &ip[(y / 2) * width];
            double* orow = &op[y * w2];
            for (std::size_t x = 0; x < w2; ++x) orow[x] = irow[x / 2];
        }
    }
    NodePtr in_n = input.node();
    return make_op({c, h2 * w2}, std::move(out), {in_n}, [in_n, c, height, width, h2, w2](Node& self) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* gp = &self.grad[ch * h2 * w2];
            double* gi = &in_n->grad[ch * height * width];
            for (std::size_t y = 0; y < h2; ++y) {
                const double* grow = &gp[y * w2];
                double* girow = &gi[(y / 2) * width];
                for (std::size_t x = 0; x < w2; ++x) girow[x / 2] += grow[x];
            }
        }
    });
}

Tensor upsample2_bilinear(const Tensor& input, std::size_t height, std::size_t width) {
    if (input.shape().size() != 2 || input.shape()[1] != height * width) {
        throw DimensionError("upsample2_bilinear: input shape " + shape_str(input.shape()) +
                             " does not match " + std::to_string(height) + "x" +
                             std::to_string(width));
    }
    const std::size_t c = input.shape()[0];
    const std::size_t h2 = height * 2, w2 = width * 2;
    // output pixel i samples input coordinate (i + 0.5) / 2 - 0.5, clamped
    auto taps = [](std::size_t i, std::size_t extent, std::size_t& lo, std::size_t& hi,
                   double& w_hi) {
        double src = 0.5 * (static_cast<double>(i) + 0.5) - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(extent - 1));
        const double f = std::floor(src);
        w_hi = src - f;
        lo = static_cast<std::size_t>(f);
        hi = lo + 1 < extent ? lo + 1 : extent - 1;
    };
    const auto& in = input.data();
    std::vector<double> out(c * h2 * w2);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* ip = &in[ch * height * width];
        double* op = &out[ch * h2 * w2];
        for (std::size_t y = 0; y < h2; ++y) {
            std::size_t y0, y1;
            double wy;
            taps(y, height, y0, y1, wy);
            for (std::size_t x = 0; x < w2; ++x) {
                std::size_t x0, x1;
                double wx;
                taps(x, width, x0, x1, wx);
                op[y * w2 + x] = (1.0 - wy) * ((1.0 - wx) * ip[y0 * width + x0] +
                                               wx * ip[y0 * width + x1]) +
                                 wy * ((1.0 - wx) * ip[y1 * width + x0] +
                                       wx * ip[y1 * width + x1]);
            }
        }
    }
    NodePtr in_n = input.node();
    return make_op({c, h2 * w2}, std::move(out), {in_n},
                   [in_n, c, height, width, h2, w2, taps](Node& self) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* gp = &self.grad[ch * h2 * w2];
            double* gi = &in_n->grad[ch * height * width];
            for (std::size_t y = 0; y < h2; ++y) {
                std::size_t y0, y1;
                double wy;
                taps(y, height, y0, y1, wy);
                for (std::size_t x = 0; x < w2; ++x) {
                    std::size_t x0, x1;
                    double wx;
                    taps(x, width, x0, x1, wx);
                    const double g = gp[y * w2 + x];
                    gi[y0 * width + x0] += (1.0 - wy) * (1.0 - wx) * g;
                    gi[y0 * width + x1] += (1.0 - wy) * wx * g;
                    gi[y1 * width + x0] += wy * (1.0 - wx) * g;
                    gi[y1 * width + x1] += wy * wx * g;
                }
            }
        }
    });
}

Tensor rmsnorm_cols(const Tensor& input, double eps) {
    if (input.shape().size() != 2) {
        throw DimensionError("rmsnorm_cols: input shape " + shape_str(input.shape()) +
                             " is not a matrix");
    }
    if (eps <= 0.0) throw DomainError("rmsnorm_cols: eps must be positive");
    const std::size_t rows = input.shape()[0];
    const std::size_t cols = input.shape()[1];
    const auto& in = input.data();
    std::vector<double> out(in.size());
    std::vector<double> inv_rms(cols);
    for (std::size_t j = 0; j < cols; ++j) {
        double sq = 0.0;
        for (std::size_t i = 0; i < rows; ++i) sq += in[i * cols + j] * in[i * cols + j];
        inv_rms[j] = 1.0 / std::sqrt(sq / static_cast<double>(rows) + eps);
        for (std::size_t i = 0; i < rows; ++i) out[i * cols + j] = in[i * cols + j] * inv_rms[j];
    }
    NodePtr in_n = input.node();
    return make_op({rows, cols}, std::move(out), {in_n},
                   [in_n, rows, cols, inv_rms = std::move(inv_rms)](Node& self) {
        // y = x / r with r = sqrt(mean(x^2) + eps) per column:
        // dx_k = g_k / r - x_k * (sum_i g_i x_i) / (rows * r^3)
        const auto& in = in_n->data;
        for (std::size_t j = 0; j < cols; ++j) {
            double dot = 0.0;
            for (std::size_t i = 0; i < rows; ++i) dot += self.grad[i * cols + j] * in[i * cols + j];
            const double r = inv_rms[j];
            const double corr = dot * r * r * r / static_cast<double>(rows);
            for (std::size_t i = 0; i < rows; ++i) {
                in_n->grad[i * cols + j] += self.grad[i * cols + j] * r - in[i * cols + j] * corr;
            }
        }
    });
}

Tensor rmsnorm_all(const Tensor& input, double eps) {
    if (eps <= 0.0) throw DomainError("rmsnorm_all: eps must be positive");
    const std::size_t n = input.size();
    if (n == 0) throw DimensionError("rmsnorm_all: empty tensor");
    const auto& in = input.data();
    double sq = 0.0;
    for (double v : in) sq += v * v;
    const double inv_rms = 1.0 / std::sqrt(sq / static_cast<double>(n) + eps);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = in[i] * inv_rms;
    NodePtr in_n = input.node();
    return make_op(input.shape(), std::move(out), {in_n}, [in_n, n, inv_rms](Node& self) {
        const auto& in = in_n->data;
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += self.grad[i] * in[i];
        const double corr = dot * inv_rms * inv_rms * inv_rms / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            in_n->grad[i] += self.grad[i] * inv_rms - in[i] * corr;
        }
    });
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h) {
    x.zero_grad();
    Tensor y = f(x);
    if (y.size() != 1) throw DimensionError("grad_check: f must be scalar-valued");
    if (!std::isfinite(y.value())) throw EvaluationError("grad_check: f(x) is not finite");
    y.backward();
    std::vector<double> g_ad = x.has_grad() ? x.grad() : std::vector<double>(x.size(), 0.0);

    auto& xd = x.raw_data();
    double max_err = 0.0;
    for (std::size_t i = 0; i < xd.size(); ++i) {
        const double orig = xd[i];
        xd[i] = orig + h;
        const double fp = f(x).value();
        xd[i] = orig - h;
        const double fm = f(x).value();
        xd[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw EvaluationError("grad_check: f not finite near x");
        }
        const double g_fd = (fp - fm) / (2.0 * h);
        const double denom = std::max({1.0, std::abs(g_ad[i]), std::abs(g_fd)});
        max_err = std::max(max_err, std::abs(g_ad[i] - g_fd) / denom);
    }
    return max_err;
}

}  // namespace p2f
