#pragma once

// Dense real/complex tensors and the reverse-mode autodiff core.
//
// Tensor<T> is a shared handle (copies alias the same storage and graph node),
// the same ownership model as the usual deep-learning tensor libraries.  Every
// differentiable op produces a new node that remembers its parents and a
// closure propagating its gradient into them.  backward() linearizes the graph
// into a GradTape (topological order) and replays it in reverse, visiting each
// node exactly once.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <new>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace radpose {

using Shape = std::vector<std::size_t>;

class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
   public:
    using Error::Error;
};

class NumericalError : public Error {
   public:
    using Error::Error;
};

inline std::size_t numel_of(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

inline Shape strides_of(const Shape& shape) {
    Shape s(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
    return s;
}

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Splits a shape around `axis` into (outer, len, inner) extents so that the
// element (o, k, i) lives at flat index (o * len + k) * inner + i.
struct AxisSplit {
    std::size_t outer = 1, len = 1, inner = 1;
};

inline AxisSplit split_axis(const Shape& shape, std::size_t axis) {
    if (axis >= shape.size())
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape));
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.len = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

namespace debug {
// When set, every op result is scanned and a NumericalError is thrown on
// NaN/Inf.
inline bool& check_finite() {
    static bool flag = false;
    return flag;
}
}  // namespace debug

namespace detail {
inline bool& grad_enabled() {
    thread_local bool enabled = true;
    return enabled;
}
}  // namespace detail

// Disables graph recording in its scope (inference, evaluation).
class NoGradGuard {
   public:
    NoGradGuard() : prev_(detail::grad_enabled()) { detail::grad_enabled() = false; }
    ~NoGradGuard() { detail::grad_enabled() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

   private:
    bool prev_;
};

// Heap storage aligned to 64 bytes.  Eigen picks vectorized or scalar code
// from pointer alignment, so fixing the alignment keeps floating-point
// summation order, and hence results, identical from run to run.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <class T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

template <class T>
struct Node {
    Shape shape;
    Buffer<T> data;
    Buffer<T> grad;  // lazily allocated
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;
    const char* op = "leaf";

    std::span<T> grad_buffer() {
        if (grad.empty()) grad.assign(data.size(), T(0));
        return grad;
    }
    bool is_leaf() const { return !backward_fn; }
};

template <class T>
class GradTape;

template <class T>
class Tensor {
   public:
    using value_type = T;
    using NodePtr = std::shared_ptr<Node<T>>;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
        node_->data.assign(numel_of(shape), fill);
        node_->shape = std::move(shape);
        node_->requires_grad = requires_grad;
    }

    Tensor(Shape shape, Buffer<T> data, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
        if (numel_of(shape) != data.size())
            throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                             shape_str(shape));
        node_->shape = std::move(shape);
        node_->data = std::move(data);
        node_->requires_grad = requires_grad;
    }

    Tensor(Shape shape, const std::vector<T>& data, bool requires_grad = false)
        : Tensor(std::move(shape), Buffer<T>(data.begin(), data.end()), requires_grad) {}

    Tensor(Shape shape, std::initializer_list<T> data, bool requires_grad = false)
        : Tensor(std::move(shape), Buffer<T>(data), requires_grad) {}

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }
    static Tensor ones(Shape shape) { return Tensor(std::move(shape), T(1)); }

    template <class Rng>
    static Tensor uniform(Shape shape, T lo, T hi, Rng& rng, bool requires_grad = false) {
        Tensor t(std::move(shape), T(0), requires_grad);
        std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
        for (auto& v : t.node_->data) v = static_cast<T>(dist(rng));
        return t;
    }

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t numel() const { return node_->data.size(); }

    std::span<T> data() { return node_->data; }
    std::span<const T> data() const { return node_->data; }
    Buffer<T>& storage() { return node_->data; }
    const Buffer<T>& storage() const { return node_->data; }

    T& operator[](std::size_t i) { return node_->data[i]; }
    const T& operator[](std::size_t i) const { return node_->data[i]; }

    T& at(std::initializer_list<std::size_t> idx) { return node_->data[offset(idx)]; }
    const T& at(std::initializer_list<std::size_t> idx) const { return node_->data[offset(idx)]; }

    T item() const {
        if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
        return node_->data[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) { node_->requires_grad = v; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const T> grad() const { return node_->grad; }
    std::span<T> grad() { return node_->grad_buffer(); }
    void zero_grad() { node_->grad.clear(); }

    // Copy of the values with no graph history.
    Tensor detach() const { return Tensor(shape(), node_->data); }
    Tensor clone() const { return detach(); }

    const char* op_name() const { return node_->op; }

    // Reverse pass from this tensor.  A non-scalar root is seeded with ones.
    void backward();

    const NodePtr& node() const { return node_; }
    explicit Tensor(NodePtr n) : node_(std::move(n)) {}

   private:
    std::size_t offset(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != rank()) throw ShapeError("index rank mismatch for shape " + shape_str(shape()));
        std::size_t off = 0, k = 0;
        for (auto i : idx) {
            if (i >= node_->shape[k]) throw ShapeError("index out of bounds on axis " + std::to_string(k));
            off = off * node_->shape[k] + i;
            ++k;
        }
        return off;
    }

    NodePtr node_;
};

// Builds an op result.  Graph edges are only kept when recording is enabled
// and some input requires a gradient.
template <class T>
Tensor<T> make_result(Shape shape, Buffer<T> data, std::vector<Tensor<T>> inputs, const char* op,
                      std::function<void(Node<T>&)> backward_fn) {
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->op = op;
    if (debug::check_finite()) {
        for (const T v : node->data)
            if (!std::isfinite(static_cast<double>(v)))
                throw NumericalError(std::string("non-finite value produced by ") + op);
    }
    if (detail::grad_enabled()) {
        bool any = false;
        for (const auto& t : inputs) any = any || t.requires_grad();
        if (any) {
            node->requires_grad = true;
            for (auto& t : inputs) node->parents.push_back(t.node());
            node->backward_fn = std::move(backward_fn);
        }
    }
    return Tensor<T>(std::move(node));
}

// Topologically ordered list of graph nodes reachable from a root: every
// node appears after all of its parents.
template <class T>
class GradTape {
   public:
    using NodePtr = std::shared_ptr<Node<T>>;

    static GradTape build(const NodePtr& root) {
        GradTape tape;
        std::unordered_set<const Node<T>*> seen;
        // iterative post-order DFS
        std::vector<std::pair<NodePtr, std::size_t>> stack;
        if (root && root->requires_grad) {
            stack.emplace_back(root, 0);
            seen.insert(root.get());
        }
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->parents.size()) {
                const NodePtr& p = node->parents[next++];
                if (p->requires_grad && seen.insert(p.get()).second) stack.emplace_back(p, 0);
            } else {
                tape.order_.push_back(node);
                stack.pop_back();
            }
        }
        return tape;
    }

    const std::vector<NodePtr>& order() const { return order_; }
    std::size_t size() const { return order_.size(); }

    // Runs each recorded backward closure once, root first.  Interior
    // gradients and closures are released as soon as they are consumed.
    void run() {
        for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
            Node<T>& n = **it;
            if (n.is_leaf()) continue;
            if (!n.grad.empty()) n.backward_fn(n);
            n.grad.clear();
            n.grad.shrink_to_fit();
            n.backward_fn = nullptr;
            n.parents.clear();
        }
    }

   private:
    std::vector<NodePtr> order_;
};

template <class T>
void Tensor<T>::backward() {
    if (!node_->requires_grad) throw Error("backward() on a tensor that does not require grad");
    auto g = node_->grad_buffer();
    std::fill(g.begin(), g.end(), T(1));
    GradTape<T>::build(node_).run();
}

// ---------------------------------------------------------------------------
// Complex tensors (radar cubes and FFT stages; never differentiated).

class ComplexTensor {
   public:
    using value_type = std::complex<double>;

    ComplexTensor() = default;
    explicit ComplexTensor(Shape shape) : shape_(std::move(shape)), data_(numel_of(shape_)) {}
    ComplexTensor(Shape shape, std::vector<value_type> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (numel_of(shape_) != data_.size())
            throw ShapeError("complex data length does not match shape " + shape_str(shape_));
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t numel() const { return data_.size(); }

    std::span<value_type> data() { return data_; }
    std::span<const value_type> data() const { return data_; }

    value_type& operator[](std::size_t i) { return data_[i]; }
    const value_type& operator[](std::size_t i) const { return data_[i]; }

    value_type& at(std::initializer_list<std::size_t> idx) { return data_[offset(idx)]; }
    const value_type& at(std::initializer_list<std::size_t> idx) const { return data_[offset(idx)]; }

    bool operator==(const ComplexTensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

   private:
    std::size_t offset(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != rank()) throw ShapeError("index rank mismatch for shape " + shape_str(shape_));
        std::size_t off = 0, k = 0;
        for (auto i : idx) {
            if (i >= shape_[k]) throw ShapeError("index out of bounds on axis " + std::to_string(k));
            off = off * shape_[k] + i;
            ++k;
        }
        return off;
    }

    Shape shape_;
    std::vector<value_type> data_;
};

}  // namespace radpose
