#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace p2f {

using Shape = std::vector<std::size_t>;

namespace detail {

// One tape entry. Parents always precede their consumers, so a post-order
// walk from the root yields a valid reverse topological order.
struct Node {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;
};

}  // namespace detail

// Row-major n-dimensional array of 64-bit floats with optional gradient
// tracking. Copying a Tensor copies the handle, not the storage.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t size() const;
    const std::vector<double>& data() const;
    std::vector<double>& raw_data();  // leaf mutation only (optimizer, grad_check)
    bool requires_grad() const;
    bool has_grad() const;
    const std::vector<double>& grad() const;
    void zero_grad();

    double value() const;  // scalar tensors
    double at(std::size_t i) const;

    // Reverse pass from a scalar root. Zeroes every gradient in the graph
    // first, so repeated calls are bit-identical.
    void backward() const;

    std::shared_ptr<detail::Node> node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

// Elementwise (same shape unless noted).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor lgamma(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor relu(const Tensor& a);

// Shape-aware.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax_lastaxis(const Tensor& a);
Tensor log_softmax_lastaxis(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor gather(const Tensor& a, const std::vector<std::size_t>& indices);
Tensor broadcast_rows(const Tensor& v, std::size_t rows);              // [n] -> [rows, n]
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);  // [m, n] -> [m, end-begin]

// Image ops on [C, H*W] maps (what the toy segmenter needs; stride 1,
// zero padding for the convolution, nearest neighbour for the upsample).
Tensor conv3x3(const Tensor& input, const Tensor& weight, const Tensor& bias,
               std::size_t height, std::size_t width);
Tensor avgpool2(const Tensor& input, std::size_t height, std::size_t width);
Tensor upsample2(const Tensor& input, std::size_t height, std::size_t width);
Tensor upsample2_bilinear(const Tensor& input, std::size_t height, std::size_t width);
Tensor rmsnorm_cols(const Tensor& input, double eps = 1e-6);
Tensor rmsnorm_all(const Tensor& input, double eps = 1e-6);

// Central-difference check of the reverse-mode gradient of a scalar-valued
// function. Returns max over coordinates of |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h = 1e-5);

}  // namespace p2f
