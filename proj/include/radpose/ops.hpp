#pragma once

// Differentiable tensor operations.  Each op computes its forward result and
// registers an analytic backward closure through make_result().

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>

#include "radpose/tensor.hpp"

namespace radpose {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// Gradient buffer of parent `i`, or an empty span when it takes no gradient.
template <class T>
std::span<T> parent_grad(Node<T>& self, std::size_t i) {
    Node<T>& p = *self.parents[i];
    if (!p.requires_grad) return {};
    return p.grad_buffer();
}

template <class T>
const Buffer<T>& parent_data(const Node<T>& self, std::size_t i) {
    return self.parents[i]->data;
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) + " vs " +
                                                shape_str(b.shape()));
    Buffer<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return make_result<T>(a.shape(), std::move(out), {a, b}, "add", [](Node<T>& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            auto g = detail::parent_grad(self, k);
            if (g.empty()) continue;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require(a.shape() == b.shape(), "sub: shape mismatch " + shape_str(a.shape()) + " vs " +
                                                shape_str(b.shape()));
    Buffer<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return make_result<T>(a.shape(), std::move(out), {a, b}, "sub", [](Node<T>& self) {
        if (auto g = detail::parent_grad(self, 0); !g.empty())
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        if (auto g = detail::parent_grad(self, 1); !g.empty())
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require(a.shape() == b.shape(), "mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                                                shape_str(b.shape()));
    Buffer<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return make_result<T>(a.shape(), std::move(out), {a, b}, "mul", [](Node<T>& self) {
        const auto& av = detail::parent_data(self, 0);
        const auto& bv = detail::parent_data(self, 1);
        if (auto g = detail::parent_grad(self, 0); !g.empty())
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
        if (auto g = detail::parent_grad(self, 1); !g.empty())
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    Buffer<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * s;
    return make_result<T>(a.shape(), std::move(out), {a}, "scale", [s](Node<T>& self) {
        auto g = detail::parent_grad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s;
    });
}

template <class T>
Tensor<T> relu(const Tensor<T>& a) {
    Buffer<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > T(0) ? a[i] : T(0);
    return make_result<T>(a.shape(), std::move(out), {a}, "relu", [](Node<T>& self) {
        const auto& x = detail::parent_data(self, 0);
        auto g = detail::parent_grad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x[i] > T(0)) g[i] += self.grad[i];
    });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    Buffer<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-a[i]));
    return make_result<T>(a.shape(), std::move(out), {a}, "sigmoid", [](Node<T>& self) {
        auto g = detail::parent_grad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const T y = self.data[i];
            g[i] += self.grad[i] * y * (T(1) - y);
        }
    });
}

// Leaky rectifier with one learnable slope shared by all elements.
template <class T>
Tensor<T> prelu(const Tensor<T>& a, const Tensor<T>& slope) {
    detail::require(slope.numel() == 1, "prelu: slope must hold a single value");
    const T s = slope[0];
    Buffer<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > T(0) ? a[i] : s * a[i];
    return make_result<T>(a.shape(), std::move(out), {a, slope}, "prelu", [](Node<T>& self) {
        const auto& x = detail::parent_data(self, 0);
        const T s = detail::parent_data(self, 1)[0];
        if (auto g = detail::parent_grad(self, 0); !g.empty())
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (x[i] > T(0) ? T(1) : s);
        if (auto g = detail::parent_grad(self, 1); !g.empty()) {
            T acc = 0;
            for (std::size_t i = 0; i < x.size(); ++i)
                if (x[i] <= T(0)) acc += self.grad[i] * x[i];
            g[0] += acc;
        }
    });
}

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
    T acc = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) acc += a[i];
    return make_result<T>(Shape{1}, Buffer<T>{acc}, {a}, "sum", [](Node<T>& self) {
        auto g = detail::parent_grad(self, 0);
        for (auto& v : g) v += self.grad[0];
    });
}

// ---------------------------------------------------------------------------
// Shape manipulation

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
    detail::require(numel_of(shape) == a.numel(),
                    "reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    return make_result<T>(std::move(shape), a.storage(), {a}, "reshape", [](Node<T>& self) {
        auto g = detail::parent_grad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

template <class T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<std::size_t>& perm) {
    const std::size_t r = a.rank();
    detail::require(perm.size() == r, "permute: permutation rank mismatch");
    Shape out_shape(r);
    for (std::size_t i = 0; i < r; ++i) out_shape[i] = a.dim(perm[i]);
    const Shape in_strides = strides_of(a.shape());
    // stride in the input for each output axis
    Shape src_stride(r);
    for (std::size_t i = 0; i < r; ++i) src_stride[i] = in_strides[perm[i]];
    std::vector<std::size_t> map(a.numel());
    {
        std::vector<std::size_t> idx(r, 0);
        for (std::size_t o = 0; o < map.size(); ++o) {
            std::size_t src = 0;
            for (std::size_t k = 0; k < r; ++k) src += idx[k] * src_stride[k];
            map[o] = src;
            for (std::size_t k = r; k-- > 0;) {
                if (++idx[k] < out_shape[k]) break;
                idx[k] = 0;
            }
        }
    }
    Buffer<T> out(a.numel());
    for (std::size_t o = 0; o < out.size(); ++o) out[o] = a[map[o]];
    return make_result<T>(out_shape, std::move(out), {a}, "permute", [map = std::move(map)](Node<T>& self) {
        auto g = detail::parent_grad(self, 0);
        for (std::size_t o = 0; o < map.size(); ++o) g[map[o]] += self.grad[o];
    });
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
    detail::require(!parts.empty(), "concat: no inputs");
    Shape shape = parts[0].shape();
    detail::require(axis < shape.size(), "concat: axis out of range");
    std::size_t total = 0;
    for (const auto& p : parts) {
        detail::require(p.rank() == shape.size(), "concat: rank mismatch");
        for (std::size_t i = 0; i < shape.size(); ++i)
            if (i != axis && p.dim(i) != shape[i])
                throw ShapeError("concat: dimension " + std::to_string(i) + " differs (" +
                                 std::to_string(p.dim(i)) + " vs " + std::to_string(shape[i]) + ")");
        total += p.dim(axis);
    }
    shape[axis] = total;
    const AxisSplit s = split_axis(shape, axis);
    Buffer<T> out(numel_of(shape));
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const auto& p : parts) {
        offsets.push_back(off);
        const std::size_t len = p.dim(axis);
        for (std::size_t o = 0; o < s.outer; ++o)
            std::copy_n(p.data().begin() + o * len * s.inner, len * s.inner,
                        out.begin() + (o * total + off) * s.inner);
        off += len;
    }
    return make_result<T>(shape, std::move(out), parts, "concat", [s, offsets, total](Node<T>& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            auto g = detail::parent_grad(self, k);
            if (g.empty()) continue;
            const std::size_t len = g.size() / (s.outer * s.inner);
            for (std::size_t o = 0; o < s.outer; ++o)
                for (std::size_t j = 0; j < len * s.inner; ++j)
                    g[o * len * s.inner + j] += self.grad[(o * total + offsets[k]) * s.inner + j];
        }
    });
}

template <class T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t start, std::size_t len) {
    const AxisSplit s = split_axis(a.shape(), axis);
    detail::require(start + len <= s.len, "slice: range exceeds axis " + std::to_string(axis));
    Shape shape = a.shape();
    shape[axis] = len;
    Buffer<T> out(numel_of(shape));
    for (std::size_t o = 0; o < s.outer; ++o)
        std::copy_n(a.data().begin() + (o * s.len + start) * s.inner, len * s.inner, out.begin() + o * len * s.inner);
    return make_result<T>(shape, std::move(out), {a}, "slice", [s, start, len](Node<T>& self) {
        auto g = detail::parent_grad(self, 0);
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t j = 0; j < len * s.inner; ++j)
                g[(o * s.len + start) * s.inner + j] += self.grad[o * len * s.inner + j];
    });
}

// Zero padding along one axis (asymmetric allowed).
template <class T>
Tensor<T> pad(const Tensor<T>& a, std::size_t axis, std::size_t before, std::size_t after) {
    const AxisSplit s = split_axis(a.shape(), axis);
    const std::size_t nl = s.len + before + after;
    Shape shape = a.shape();
    shape[axis] = nl;
    Buffer<T> out(numel_of(shape), T(0));
    for (std::size_t o = 0; o < s.outer; ++o)
        std::copy_n(a.data().begin() + o * s.len * s.inner, s.len * s.inner, out.begin() + (o * nl + before) * s.inner);
    return make_result<T>(shape, std::move(out), {a}, "pad", [s, nl, before](Node<T>& self) {
        auto g = detail::parent_grad(self, 0);
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t j = 0; j < s.len * s.inner; ++j)
                g[o * s.len * s.inner + j] += self.grad[(o * nl + before) * s.inner + j];
    });
}

// Mean over one axis; the axis is removed from the result.
template <class T>
Tensor<T> mean_axis(const Tensor<T>& a, std::size_t axis) {
    const AxisSplit s = split_axis(a.shape(), axis);
    Shape shape = a.shape();
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
    Buffer<T> out(s.outer * s.inner, T(0));
    const T inv = T(1) / static_cast<T>(s.len);
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t k = 0; k < s.len; ++k)
            for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += a[(o * s.len + k) * s.inner + i];
    for (auto& v : out) v *= inv;
    return make_result<T>(shape, std::move(out), {a}, "mean_axis", [s, inv](Node<T>& self) {
        auto g = detail::parent_grad(self, 0);
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t k = 0; k < s.len; ++k)
                for (std::size_t i = 0; i < s.inner; ++i)
                    g[(o * s.len + k) * s.inner + i] += self.grad[o * s.inner + i] * inv;
    });
}

// ---------------------------------------------------------------------------
// Pooling and resampling

// Max over sliding windows along one axis.  Backward routes the gradient to
// the first maximal element of each window.
template <class T>
Tensor<T> maxpool(const Tensor<T>& a, std::size_t axis, std::size_t window, std::size_t stride) {
    const AxisSplit s = split_axis(a.shape(), axis);
    if (window == 0 || stride == 0) throw ShapeError("maxpool: window and stride must be positive");
    if (window > s.len)
        throw ShapeError("maxpool: window " + std::to_string(window) + " exceeds axis length " + std::to_string(s.len));
    const std::size_t ol = (s.len - window) / stride + 1;
    Shape shape = a.shape();
    shape[axis] = ol;
    Buffer<T> out(s.outer * ol * s.inner);
    std::vector<std::uint32_t> arg(out.size());
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t k = 0; k < ol; ++k)
            for (std::size_t i = 0; i < s.inner; ++i) {
                std::size_t best = (o * s.len + k * stride) * s.inner + i;
                for (std::size_t w = 1; w < window; ++w) {
                    const std::size_t idx = (o * s.len + k * stride + w) * s.inner + i;
                    if (a[idx] > a[best]) best = idx;
                }
                const std::size_t oi = (o * ol + k) * s.inner + i;
                out[oi] = a[best];
                arg[oi] = static_cast<std::uint32_t>(best);
            }
    return make_result<T>(shape, std::move(out), {a}, "maxpool", [arg = std::move(arg)](Node<T>& self) {
        auto g = detail::parent_grad(self, 0);
        for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += self.grad[i];
    });
}

// 2x2 average pooling over the last two axes.
template <class T>
Tensor<T> avgpool2(const Tensor<T>& a) {
    const std::size_t r = a.rank();
    detail::require(r >= 2, "avgpool2: rank must be >= 2");
    const std::size_t h = a.dim(r - 2), w = a.dim(r - 1);
    detail::require(h % 2 == 0 && w % 2 == 0, "avgpool2: spatial dims must be even");
    const std::size_t planes = a.numel() / (h * w);
    Shape shape = a.shape();
    shape[r - 2] = h / 2;
    shape[r - 1] = w / 2;
    Buffer<T> out(planes * (h / 2) * (w / 2));
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < h / 2; ++i)
            for (std::size_t j = 0; j < w / 2; ++j) {
                const std::size_t b = p * h * w + 2 * i * w + 2 * j;
                out[(p * (h / 2) + i) * (w / 2) + j] = (a[b] + a[b + 1] + a[b + w] + a[b + w + 1]) * T(0.25);
            }
    return make_result<T>(shape, std::move(out), {a}, "avgpool2", [planes, h, w](Node<T>& self) {
        auto g = detail::parent_grad(self, 0);
        for (std::size_t p = 0; p < planes; ++p)
            for (std::size_t i = 0; i < h / 2; ++i)
                for (std::size_t j = 0; j < w / 2; ++j) {
                    const T v = self.grad[(p * (h / 2) + i) * (w / 2) + j] * T(0.25);
                    const std::size_t b = p * h * w + 2 * i * w + 2 * j;
                    g[b] += v;
                    g[b + 1] += v;
                    g[b + w] += v;
                    g[b + w + 1] += v;
                }
    });
}

// Nearest-neighbour 2x upsampling over the last two axes.
template <class T>
Tensor<T> upsample2(const Tensor<T>& a) {
    const std::size_t r = a.rank();
    detail::require(r >= 2, "upsample2: rank must be >= 2");
    const std::size_t h = a.dim(r - 2), w = a.dim(r - 1);
    const std::size_t planes = a.numel() / (h * w);
    Shape shape = a.shape();
    shape[r - 2] = 2 * h;
    shape[r - 1] = 2 * w;
    Buffer<T> out(planes * 4 * h * w);
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < 2 * h; ++i)
            for (std::size_t j = 0; j < 2 * w; ++j)
                out[(p * 2 * h + i) * 2 * w + j] = a[(p * h + i / 2) * w + j / 2];
    return make_result<T>(shape, std::move(out), {a}, "upsample2", [planes, h, w](Node<T>& self) {
        auto g = detail::parent_grad(self, 0);
        for (std::size_t p = 0; p < planes; ++p)
            for (std::size_t i = 0; i < 2 * h; ++i)
                for (std::size_t j = 0; j < 2 * w; ++j)
                    g[(p * h + i / 2) * w + j / 2] += self.grad[(p * 2 * h + i) * 2 * w + j];
    });
}

// ---------------------------------------------------------------------------
// Convolution (cross-correlation, no kernel flip) via im2col + GEMM.

struct Conv3dParams {
    std::array<std::size_t, 3> stride{1, 1, 1};
    std::array<std::size_t, 3> padding{0, 0, 0};
};

namespace detail {

struct ConvGeom {
    std::size_t ci, ti, hi, wi;
    std::size_t co, kt, kh, kw;
    std::size_t to, ho, wo;
    std::size_t st, sh, sw, pt, ph, pw;

    std::size_t rows() const { return ci * kt * kh * kw; }
    std::size_t cols() const { return to * ho * wo; }
    std::size_t in_size() const { return ci * ti * hi * wi; }
    bool pointwise() const {
        return kt == 1 && kh == 1 && kw == 1 && st == 1 && sh == 1 && sw == 1 && pt == 0 && ph == 0 && pw == 0;
    }
};

template <class T>
void im2col(const T* x, const ConvGeom& g, T* cols) {
    const std::size_t L = g.cols();
    for (std::size_t c = 0; c < g.ci; ++c)
        for (std::size_t a = 0; a < g.kt; ++a)
            for (std::size_t b = 0; b < g.kh; ++b)
                for (std::size_t d = 0; d < g.kw; ++d) {
                    T* row = cols + (((c * g.kt + a) * g.kh + b) * g.kw + d) * L;
                    for (std::size_t ot = 0; ot < g.to; ++ot) {
                        const std::ptrdiff_t it = static_cast<std::ptrdiff_t>(ot * g.st + a) - static_cast<std::ptrdiff_t>(g.pt);
                        for (std::size_t oh = 0; oh < g.ho; ++oh) {
                            T* dst = row + (ot * g.ho + oh) * g.wo;
                            const std::ptrdiff_t ih =
                                static_cast<std::ptrdiff_t>(oh * g.sh + b) - static_cast<std::ptrdiff_t>(g.ph);
                            if (it < 0 || it >= static_cast<std::ptrdiff_t>(g.ti) || ih < 0 ||
                                ih >= static_cast<std::ptrdiff_t>(g.hi)) {
                                std::fill_n(dst, g.wo, T(0));
                                continue;
                            }
                            const T* src = x + ((c * g.ti + static_cast<std::size_t>(it)) * g.hi +
                                                static_cast<std::size_t>(ih)) * g.wi;
                            for (std::size_t ow = 0; ow < g.wo; ++ow) {
                                const std::ptrdiff_t iw =
                                    static_cast<std::ptrdiff_t>(ow * g.sw + d) - static_cast<std::ptrdiff_t>(g.pw);
                                dst[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.wi)) ? T(0)
                                                                                               : src[iw];
                            }
                        }
                    }
                }
}

template <class T>
void col2im(const T* cols, const ConvGeom& g, T* x) {
    const std::size_t L = g.cols();
    for (std::size_t c = 0; c < g.ci; ++c)
        for (std::size_t a = 0; a < g.kt; ++a)
            for (std::size_t b = 0; b < g.kh; ++b)
                for (std::size_t d = 0; d < g.kw; ++d) {
                    const T* row = cols + (((c * g.kt + a) * g.kh + b) * g.kw + d) * L;
                    for (std::size_t ot = 0; ot < g.to; ++ot) {
                        const std::ptrdiff_t it = static_cast<std::ptrdiff_t>(ot * g.st + a) - static_cast<std::ptrdiff_t>(g.pt);
                        if (it < 0 || it >= static_cast<std::ptrdiff_t>(g.ti)) continue;
                        for (std::size_t oh = 0; oh < g.ho; ++oh) {
                            const std::ptrdiff_t ih =
                                static_cast<std::ptrdiff_t>(oh * g.sh + b) - static_cast<std::ptrdiff_t>(g.ph);
                            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.hi)) continue;
                            const T* src = row + (ot * g.ho + oh) * g.wo;
                            T* dst = x + ((c * g.ti + static_cast<std::size_t>(it)) * g.hi + static_cast<std::size_t>(ih)) * g.wi;
                            for (std::size_t ow = 0; ow < g.wo; ++ow) {
                                const std::ptrdiff_t iw =
                                    static_cast<std::ptrdiff_t>(ow * g.sw + d) - static_cast<std::ptrdiff_t>(g.pw);
                                if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.wi)) dst[iw] += src[ow];
                            }
                        }
                    }
                }
}

inline std::size_t conv_out_len(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                                const char* axis) {
    if (stride == 0) throw ShapeError(std::string("conv: stride must be >= 1 on axis ") + axis);
    if (in + 2 * pad < k)
        throw ShapeError(std::string("conv: kernel ") + std::to_string(k) + " larger than padded input " +
                         std::to_string(in + 2 * pad) + " on axis " + axis);
    return (in + 2 * pad - k) / stride + 1;
}

}  // namespace detail

// x: (B, Ci, T, H, W); weight: (Co, Ci, kT, kH, kW); bias: (Co) or undefined.
template <class T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, const Conv3dParams& p = {}) {
    if (x.rank() != 5) throw ShapeError("conv3d: input must be (B, C, T, H, W), got " + shape_str(x.shape()));
    if (weight.rank() != 5) throw ShapeError("conv3d: weight must be (Co, Ci, kT, kH, kW)");
    if (weight.dim(1) != x.dim(1))
        throw ShapeError("conv3d: input channels " + std::to_string(x.dim(1)) + " != weight in-channels " +
                         std::to_string(weight.dim(1)));
    const bool has_bias = bias.defined();
    if (has_bias && (bias.rank() != 1 || bias.dim(0) != weight.dim(0)))
        throw ShapeError("conv3d: bias must have shape (" + std::to_string(weight.dim(0)) + ")");
    detail::ConvGeom g{};
    g.ci = x.dim(1);
    g.ti = x.dim(2);
    g.hi = x.dim(3);
    g.wi = x.dim(4);
    g.co = weight.dim(0);
    g.kt = weight.dim(2);
    g.kh = weight.dim(3);
    g.kw = weight.dim(4);
    g.st = p.stride[0];
    g.sh = p.stride[1];
    g.sw = p.stride[2];
    g.pt = p.padding[0];
    g.ph = p.padding[1];
    g.pw = p.padding[2];
    g.to = detail::conv_out_len(g.ti, g.kt, g.st, g.pt, "T");
    g.ho = detail::conv_out_len(g.hi, g.kh, g.sh, g.ph, "H");
    g.wo = detail::conv_out_len(g.wi, g.kw, g.sw, g.pw, "W");
    const std::size_t B = x.dim(0), R = g.rows(), L = g.cols();

    Buffer<T> out(B * g.co * L);
    Buffer<T> cols(g.pointwise() ? 0 : R * L);
    detail::ConstMatMap<T> W(weight.data().data(), static_cast<Eigen::Index>(g.co), static_cast<Eigen::Index>(R));
    for (std::size_t b = 0; b < B; ++b) {
        const T* xb = x.data().data() + b * g.in_size();
        const T* cptr = xb;
        if (!g.pointwise()) {
            detail::im2col(xb, g, cols.data());
            cptr = cols.data();
        }
        detail::ConstMatMap<T> C(cptr, static_cast<Eigen::Index>(R), static_cast<Eigen::Index>(L));
        detail::MatMap<T> Y(out.data() + b * g.co * L, static_cast<Eigen::Index>(g.co), static_cast<Eigen::Index>(L));
        Y.noalias() = W * C;
        if (has_bias)
            for (std::size_t c = 0; c < g.co; ++c) Y.row(static_cast<Eigen::Index>(c)).array() += bias[c];
    }
    std::vector<Tensor<T>> inputs{x, weight};
    if (has_bias) inputs.push_back(bias);
    return make_result<T>(Shape{B, g.co, g.to, g.ho, g.wo}, std::move(out), inputs, "conv3d",
                          [g, B, has_bias](Node<T>& self) {
                              const std::size_t R = g.rows(), L = g.cols();
                              const auto& xv = detail::parent_data(self, 0);
                              const auto& wv = detail::parent_data(self, 1);
                              auto gx = detail::parent_grad(self, 0);
                              auto gw = detail::parent_grad(self, 1);
                              std::span<T> gb = has_bias ? detail::parent_grad(self, 2) : std::span<T>{};
                              Buffer<T> cols(g.pointwise() ? 0 : R * L);
                              Buffer<T> dcols(gx.empty() || g.pointwise() ? 0 : R * L);
                              detail::ConstMatMap<T> W(wv.data(), static_cast<Eigen::Index>(g.co),
                                                       static_cast<Eigen::Index>(R));
                              for (std::size_t b = 0; b < B; ++b) {
                                  detail::ConstMatMap<T> dY(self.grad.data() + b * g.co * L,
                                                            static_cast<Eigen::Index>(g.co),
                                                            static_cast<Eigen::Index>(L));
                                  const T* xb = xv.data() + b * g.in_size();
                                  if (!gw.empty()) {
                                      const T* cptr = xb;
                                      if (!g.pointwise()) {
                                          detail::im2col(xb, g, cols.data());
                                          cptr = cols.data();
                                      }
                                      detail::ConstMatMap<T> C(cptr, static_cast<Eigen::Index>(R),
                                                               static_cast<Eigen::Index>(L));
                                      detail::MatMap<T> dW(gw.data(), static_cast<Eigen::Index>(g.co),
                                                           static_cast<Eigen::Index>(R));
                                      dW.noalias() += dY * C.transpose();
                                  }
                                  if (!gb.empty())
                                      for (std::size_t c = 0; c < g.co; ++c) gb[c] += dY.row(static_cast<Eigen::Index>(c)).sum();
                                  if (!gx.empty()) {
                                      T* gxb = gx.data() + b * g.in_size();
                                      if (g.pointwise()) {
                                          detail::MatMap<T> dX(gxb, static_cast<Eigen::Index>(R),
                                                               static_cast<Eigen::Index>(L));
                                          dX.noalias() += W.transpose() * dY;
                                      } else {
                                          detail::MatMap<T> dC(dcols.data(), static_cast<Eigen::Index>(R),
                                                               static_cast<Eigen::Index>(L));
                                          dC.noalias() = W.transpose() * dY;
                                          detail::col2im(dcols.data(), g, gxb);
                                      }
                                  }
                              }
                          });
}

struct Conv2dParams {
    std::array<std::size_t, 2> stride{1, 1};
    std::array<std::size_t, 2> padding{0, 0};
};

// x: (B, Ci, H, W) or (Ci, H, W); weight: (Co, Ci, kH, kW); bias: (Co) or undefined.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, const Conv2dParams& p = {}) {
    const bool batched = x.rank() == 4;
    if (!batched && x.rank() != 3) throw ShapeError("conv2d: input must be (B, C, H, W) or (C, H, W)");
    if (weight.rank() != 4) throw ShapeError("conv2d: weight must be (Co, Ci, kH, kW)");
    const Shape& s = x.shape();
    const std::size_t B = batched ? s[0] : 1;
    const std::size_t o = batched ? 1 : 0;
    Tensor<T> x5 = reshape(x, Shape{B, s[o], 1, s[o + 1], s[o + 2]});
    Tensor<T> w5 = reshape(weight, Shape{weight.dim(0), weight.dim(1), 1, weight.dim(2), weight.dim(3)});
    Conv3dParams p3;
    p3.stride = {1, p.stride[0], p.stride[1]};
    p3.padding = {0, p.padding[0], p.padding[1]};
    Tensor<T> y = conv3d(x5, w5, bias, p3);
    if (batched) return reshape(y, Shape{B, y.dim(1), y.dim(3), y.dim(4)});
    return reshape(y, Shape{y.dim(1), y.dim(3), y.dim(4)});
}

// ---------------------------------------------------------------------------
// Batch normalization over (B, C, ...): per-channel statistics across batch
// and all trailing axes.

template <class T>
struct BatchNormState {
    Tensor<T> running_mean;
    Tensor<T> running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);
};

template <class T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, BatchNormState<T>& st,
                    bool training) {
    detail::require(x.rank() >= 2, "batchnorm: input must be (B, C, ...)");
    const std::size_t B = x.dim(0), C = x.dim(1);
    const std::size_t S = x.numel() / (B * C);
    detail::require(gamma.numel() == C && beta.numel() == C, "batchnorm: affine parameters must have C entries");
    std::vector<T> mean(C, T(0)), invstd(C, T(0));
    const std::size_t n = B * S;
    if (training) {
        for (std::size_t c = 0; c < C; ++c) {
            double m = 0;
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t i = 0; i < S; ++i) m += x[(b * C + c) * S + i];
            m /= static_cast<double>(n);
            double v = 0;
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t i = 0; i < S; ++i) {
                    const double d = x[(b * C + c) * S + i] - m;
                    v += d * d;
                }
            v /= static_cast<double>(n);
            mean[c] = static_cast<T>(m);
            invstd[c] = static_cast<T>(1.0 / std::sqrt(v + static_cast<double>(st.eps)));
            const double unbiased = n > 1 ? v * static_cast<double>(n) / static_cast<double>(n - 1) : v;
            st.running_mean[c] = (T(1) - st.momentum) * st.running_mean[c] + st.momentum * static_cast<T>(m);
            st.running_var[c] = (T(1) - st.momentum) * st.running_var[c] + st.momentum * static_cast<T>(unbiased);
        }
    } else {
        for (std::size_t c = 0; c < C; ++c) {
            mean[c] = st.running_mean[c];
            invstd[c] = T(1) / std::sqrt(st.running_var[c] + st.eps);
        }
    }
    Buffer<T> out(x.numel());
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < S; ++i) {
                const std::size_t k = (b * C + c) * S + i;
                out[k] = gamma[c] * (x[k] - mean[c]) * invstd[c] + beta[c];
            }
    return make_result<T>(
        x.shape(), std::move(out), {x, gamma, beta}, "batchnorm",
        [B, C, S, n, training, mean = std::move(mean), invstd = std::move(invstd)](Node<T>& self) {
            const auto& xv = detail::parent_data(self, 0);
            const auto& gv = detail::parent_data(self, 1);
            auto gx = detail::parent_grad(self, 0);
            auto gg = detail::parent_grad(self, 1);
            auto gbeta = detail::parent_grad(self, 2);
            for (std::size_t c = 0; c < C; ++c) {
                T sum_dy = 0, sum_dy_xhat = 0;
                for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t i = 0; i < S; ++i) {
                        const std::size_t k = (b * C + c) * S + i;
                        const T xhat = (xv[k] - mean[c]) * invstd[c];
                        sum_dy += self.grad[k];
                        sum_dy_xhat += self.grad[k] * xhat;
                    }
                if (!gg.empty()) gg[c] += sum_dy_xhat;
                if (!gbeta.empty()) gbeta[c] += sum_dy;
                if (gx.empty()) continue;
                const T nn = static_cast<T>(n);
                for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t i = 0; i < S; ++i) {
                        const std::size_t k = (b * C + c) * S + i;
                        if (training) {
                            const T xhat = (xv[k] - mean[c]) * invstd[c];
                            gx[k] += gv[c] * invstd[c] / nn * (nn * self.grad[k] - sum_dy - xhat * sum_dy_xhat);
                        } else {
                            gx[k] += gv[c] * invstd[c] * self.grad[k];
                        }
                    }
            }
        });
}

// ---------------------------------------------------------------------------
// Matrix products

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul: operands must be rank 2");
    if (a.dim(1) != b.dim(0))
        throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.dim(1)) + " vs " +
                         std::to_string(b.dim(0)) + ")");
    const auto M = static_cast<Eigen::Index>(a.dim(0)), K = static_cast<Eigen::Index>(a.dim(1)),
               N = static_cast<Eigen::Index>(b.dim(1));
    Buffer<T> out(static_cast<std::size_t>(M * N));
    detail::MatMap<T>(out.data(), M, N).noalias() =
        detail::ConstMatMap<T>(a.data().data(), M, K) * detail::ConstMatMap<T>(b.data().data(), K, N);
    return make_result<T>(Shape{a.dim(0), b.dim(1)}, std::move(out), {a, b}, "matmul", [M, K, N](Node<T>& self) {
        detail::ConstMatMap<T> dC(self.grad.data(), M, N);
        if (auto g = detail::parent_grad(self, 0); !g.empty())
            detail::MatMap<T>(g.data(), M, K).noalias() +=
                dC * detail::ConstMatMap<T>(detail::parent_data(self, 1).data(), K, N).transpose();
        if (auto g = detail::parent_grad(self, 1); !g.empty())
            detail::MatMap<T>(g.data(), K, N).noalias() +=
                detail::ConstMatMap<T>(detail::parent_data(self, 0).data(), M, K).transpose() * dC;
    });
}

// Batched product C[b] = op(A[b]) * op(B[b]), op = optional transpose.
template <class T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool trans_a = false, bool trans_b = false) {
    if (a.rank() != 3 || b.rank() != 3) throw ShapeError("bmm: operands must be rank 3");
    if (a.dim(0) != b.dim(0)) throw ShapeError("bmm: batch sizes differ");
    const std::size_t Bn = a.dim(0);
    const std::size_t ar = a.dim(1), ac = a.dim(2), br = b.dim(1), bc = b.dim(2);
    const std::size_t M = trans_a ? ac : ar, K = trans_a ? ar : ac;
    const std::size_t K2 = trans_b ? bc : br, N = trans_b ? br : bc;
    if (K != K2)
        throw ShapeError("bmm: inner dimensions differ (" + std::to_string(K) + " vs " + std::to_string(K2) + ")");
    Buffer<T> out(Bn * M * N);
    using Idx = Eigen::Index;
    for (std::size_t i = 0; i < Bn; ++i) {
        detail::ConstMatMap<T> A(a.data().data() + i * ar * ac, static_cast<Idx>(ar), static_cast<Idx>(ac));
        detail::ConstMatMap<T> Bm(b.data().data() + i * br * bc, static_cast<Idx>(br), static_cast<Idx>(bc));
        detail::MatMap<T> C(out.data() + i * M * N, static_cast<Idx>(M), static_cast<Idx>(N));
        if (!trans_a && !trans_b) C.noalias() = A * Bm;
        else if (trans_a && !trans_b) C.noalias() = A.transpose() * Bm;
        else if (!trans_a && trans_b) C.noalias() = A * Bm.transpose();
        else C.noalias() = A.transpose() * Bm.transpose();
    }
    return make_result<T>(Shape{Bn, M, N}, std::move(out), {a, b}, "bmm",
                          [=](Node<T>& self) {
                              const auto& av = detail::parent_data(self, 0);
                              const auto& bv = detail::parent_data(self, 1);
                              auto ga = detail::parent_grad(self, 0);
                              auto gb = detail::parent_grad(self, 1);
                              for (std::size_t i = 0; i < Bn; ++i) {
                                  detail::ConstMatMap<T> dC(self.grad.data() + i * M * N, static_cast<Idx>(M),
                                                            static_cast<Idx>(N));
                                  detail::ConstMatMap<T> A(av.data() + i * ar * ac, static_cast<Idx>(ar),
                                                           static_cast<Idx>(ac));
                                  detail::ConstMatMap<T> Bm(bv.data() + i * br * bc, static_cast<Idx>(br),
                                                            static_cast<Idx>(bc));
                                  if (!ga.empty()) {
                                      detail::MatMap<T> dA(ga.data() + i * ar * ac, static_cast<Idx>(ar),
                                                           static_cast<Idx>(ac));
                                      // d op(A) = dC * op(B)^T
                                      if (!trans_a && !trans_b) dA.noalias() += dC * Bm.transpose();
                                      else if (!trans_a && trans_b) dA.noalias() += dC * Bm;
                                      else if (trans_a && !trans_b) dA.noalias() += Bm * dC.transpose();
                                      else dA.noalias() += Bm.transpose() * dC.transpose();
                                  }
                                  if (!gb.empty()) {
                                      detail::MatMap<T> dB(gb.data() + i * br * bc, static_cast<Idx>(br),
                                                           static_cast<Idx>(bc));
                                      // d op(B) = op(A)^T * dC
                                      if (!trans_a && !trans_b) dB.noalias() += A.transpose() * dC;
                                      else if (trans_a && !trans_b) dB.noalias() += A * dC;
                                      else if (!trans_a && trans_b) dB.noalias() += dC.transpose() * A;
                                      else dB.noalias() += dC.transpose() * A.transpose();
                                  }
                              }
                          });
}

// Softmax over the last axis.
template <class T>
Tensor<T> softmax(const Tensor<T>& a) {
    const std::size_t n = a.dim(a.rank() - 1);
    const std::size_t rows = a.numel() / n;
    Buffer<T> out(a.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* x = a.data().data() + r * n;
        T* y = out.data() + r * n;
        const T m = *std::max_element(x, x + n);
        T z = 0;
        for (std::size_t i = 0; i < n; ++i) z += (y[i] = std::exp(x[i] - m));
        const T inv = T(1) / z;
        for (std::size_t i = 0; i < n; ++i) y[i] *= inv;
    }
    return make_result<T>(a.shape(), std::move(out), {a}, "softmax", [n, rows](Node<T>& self) {
        auto g = detail::parent_grad(self, 0);
        for (std::size_t r = 0; r < rows; ++r) {
            const T* y = self.data.data() + r * n;
            const T* dy = self.grad.data() + r * n;
            T dot = 0;
            for (std::size_t i = 0; i < n; ++i) dot += dy[i] * y[i];
            for (std::size_t i = 0; i < n; ++i) g[r * n + i] += y[i] * (dy[i] - dot);
        }
    });
}

// Left-multiplies every (C, P) slice of x: (B, C, P) by a fixed C x C matrix.
// Each output sums its non-zero terms in ascending order of value, so
// relabeling the C nodes permutes the result without changing any bits.
template <class T>
Tensor<T> graph_mix(std::span<const T> mix, std::size_t c, const Tensor<T>& x) {
    if (x.rank() != 3 || x.dim(1) != c || mix.size() != c * c)
        throw ShapeError("graph_mix: expected (B, " + std::to_string(c) + ", P) input, got " + shape_str(x.shape()));
    const std::size_t B = x.dim(0), P = x.dim(2);
    std::vector<T> m(mix.begin(), mix.end());
    Buffer<T> out(x.numel());
    std::vector<T> terms;
    terms.reserve(c);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < c; ++i)
            for (std::size_t p = 0; p < P; ++p) {
                terms.clear();
                for (std::size_t j = 0; j < c; ++j)
                    if (m[i * c + j] != T(0)) terms.push_back(m[i * c + j] * x[(b * c + j) * P + p]);
                std::sort(terms.begin(), terms.end());
                T acc = 0;
                for (T v : terms) acc += v;
                out[(b * c + i) * P + p] = acc;
            }
    return make_result<T>(x.shape(), std::move(out), {x}, "graph_mix", [m = std::move(m), c, B, P](Node<T>& self) {
        auto g = detail::parent_grad(self, 0);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t i = 0; i < c; ++i)
                for (std::size_t j = 0; j < c; ++j) {
                    const T a = m[i * c + j];
                    if (a == T(0)) continue;
                    for (std::size_t p = 0; p < P; ++p) g[(b * c + j) * P + p] += a * self.grad[(b * c + i) * P + p];
                }
    });
}

// Row-wise linear map: y[r, :] = x[r, :] * W for x (R, P) and W (P, Q).  Every
// row goes through the same vector-matrix product, so a row's result does not
// depend on its position (unlike a blocked GEMM).
template <class T>
Tensor<T> rowwise_matmul(const Tensor<T>& x, const Tensor<T>& w) {
    if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0))
        throw ShapeError("rowwise_matmul: expected (R, P) x (P, Q), got " + shape_str(x.shape()) + " x " +
                         shape_str(w.shape()));
    using Idx = Eigen::Index;
    const auto R = static_cast<Idx>(x.dim(0)), P = static_cast<Idx>(x.dim(1)), Q = static_cast<Idx>(w.dim(1));
    using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
    Buffer<T> out(static_cast<std::size_t>(R * Q));
    detail::ConstMatMap<T> W(w.data().data(), P, Q);
    for (Idx r = 0; r < R; ++r) {
        Eigen::Map<const RowVec> xr(x.data().data() + r * P, P);
        Eigen::Map<RowVec> yr(out.data() + r * Q, Q);
        yr.noalias() = xr * W;
    }
    return make_result<T>(Shape{x.dim(0), w.dim(1)}, std::move(out), {x, w}, "rowwise_matmul",
                          [R, P, Q](Node<T>& self) {
                              detail::ConstMatMap<T> dY(self.grad.data(), R, Q);
                              if (auto g = detail::parent_grad(self, 0); !g.empty())
                                  detail::MatMap<T>(g.data(), R, P).noalias() +=
                                      dY * detail::ConstMatMap<T>(detail::parent_data(self, 1).data(), P, Q).transpose();
                              if (auto g = detail::parent_grad(self, 1); !g.empty())
                                  detail::MatMap<T>(g.data(), P, Q).noalias() +=
                                      detail::ConstMatMap<T>(detail::parent_data(self, 0).data(), R, P).transpose() * dY;
                          });
}

// ---------------------------------------------------------------------------
// Loss

// Summed pixel-wise binary cross-entropy between probabilities `p` and
// targets `t` (same shape).  Probabilities are clamped to [eps, 1 - eps]; the
// gradient uses the clamped value, (p - t) / (p (1 - p)).  `plane_weight`,
// when non-empty, scales each trailing (H, W) plane (masks invisible
// keypoints).
template <class T>
Tensor<T> bce_sum(const Tensor<T>& p, const Tensor<T>& t, std::span<const T> plane_weight = {},
                  T eps = T(1e-7)) {
    detail::require(p.shape() == t.shape(), "bce: prediction and target shapes differ");
    for (std::size_t i = 0; i < t.numel(); ++i)
        if (!(t[i] >= T(0) && t[i] <= T(1))) throw Error("bce: target value outside [0, 1]");
    const std::size_t r = p.rank();
    const std::size_t plane = r >= 2 ? p.dim(r - 2) * p.dim(r - 1) : p.numel();
    std::vector<T> w(plane_weight.begin(), plane_weight.end());
    if (!w.empty() && w.size() * plane != p.numel()) throw ShapeError("bce: plane weight count mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < p.numel(); ++i) {
        const T q = std::clamp(p[i], eps, T(1) - eps);
        const double l = -(static_cast<double>(t[i]) * std::log(static_cast<double>(q)) +
                           (1.0 - static_cast<double>(t[i])) * std::log(1.0 - static_cast<double>(q)));
        acc += w.empty() ? l : l * static_cast<double>(w[i / plane]);
    }
    return make_result<T>(Shape{1}, Buffer<T>{static_cast<T>(acc)}, {p, t}, "bce_sum",
                          [w = std::move(w), plane, eps](Node<T>& self) {
                              const auto& pv = detail::parent_data(self, 0);
                              const auto& tv = detail::parent_data(self, 1);
                              auto g = detail::parent_grad(self, 0);
                              if (g.empty()) return;
                              const T up = self.grad[0];
                              for (std::size_t i = 0; i < g.size(); ++i) {
                                  const T q = std::clamp(pv[i], eps, T(1) - eps);
                                  T d = (q - tv[i]) / (q * (T(1) - q));
                                  if (!w.empty()) d *= w[i / plane];
                                  g[i] += up * d;
                              }
                          });
}

}  // namespace radpose
