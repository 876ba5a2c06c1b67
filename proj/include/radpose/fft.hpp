#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "radpose/tensor.hpp"

namespace radpose {

namespace detail {

// Radix-2 plan for one power-of-two length: bit-reversal permutation plus the
// forward twiddles e^{-j 2 pi k / N}, k < N/2.
class FftPlan {
   public:
    explicit FftPlan(std::size_t n) : n_(n), rev_(n), tw_(n / 2) {
        std::size_t bits = 0;
        while ((std::size_t{1} << bits) < n) ++bits;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < bits; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
            rev_[i] = r;
        }
        for (std::size_t k = 0; k < n / 2; ++k) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
            tw_[k] = {std::cos(ang), std::sin(ang)};
        }
    }

    // Forward transform X[k] = sum_n x[n] e^{-j 2 pi k n / N}, in place.
    void forward(std::vector<std::complex<double>>& a) const {
        for (std::size_t i = 0; i < n_; ++i)
            if (i < rev_[i]) std::swap(a[i], a[rev_[i]]);
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            const std::size_t half = len / 2;
            const std::size_t step = n_ / len;
            for (std::size_t i = 0; i < n_; i += len) {
                for (std::size_t k = 0; k < half; ++k) {
                    const auto u = a[i + k];
                    const auto v = a[i + k + half] * tw_[k * step];
                    a[i + k] = u + v;
                    a[i + k + half] = u - v;
                }
            }
        }
    }

   private:
    std::size_t n_;
    std::vector<std::size_t> rev_;
    std::vector<std::complex<double>> tw_;
};

template <class F>
void for_each_axis_line(ComplexTensor& x, std::size_t axis, F&& f) {
    const AxisSplit s = split_axis(x.shape(), axis);
    std::vector<std::complex<double>> line(s.len);
    auto data = x.data();
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t base = o * s.len * s.inner + i;
            for (std::size_t k = 0; k < s.len; ++k) line[k] = data[base + k * s.inner];
            f(line);
            for (std::size_t k = 0; k < s.len; ++k) data[base + k * s.inner] = line[k];
        }
    }
}

}  // namespace detail

// Unnormalized forward DFT along one axis.  The axis length must be a power
// of two; padding is the caller's job.
inline ComplexTensor fft1d(ComplexTensor x, std::size_t axis) {
    if (axis >= x.rank()) throw ShapeError("fft1d: axis " + std::to_string(axis) + " >= rank");
    const std::size_t n = x.dim(axis);
    if (!is_pow2(n)) throw ShapeError("fft1d: axis length " + std::to_string(n) + " is not a power of two");
    const detail::FftPlan plan(n);
    detail::for_each_axis_line(x, axis, [&plan](auto& line) { plan.forward(line); });
    return x;
}

// Inverse of fft1d (includes the 1/N factor), via the conjugate trick.
inline ComplexTensor ifft1d(ComplexTensor x, std::size_t axis) {
    for (auto& v : x.data()) v = std::conj(v);
    x = fft1d(std::move(x), axis);
    const double inv = 1.0 / static_cast<double>(x.dim(axis));
    for (auto& v : x.data()) v = std::conj(v) * inv;
    return x;
}

// Cyclic rotation by floor(len/2): index 0 moves to len/2.
inline ComplexTensor fftshift(const ComplexTensor& x, std::size_t axis) {
    const AxisSplit s = split_axis(x.shape(), axis);
    const std::size_t shift = s.len / 2;
    ComplexTensor out(x.shape());
    auto src = x.data();
    auto dst = out.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t k = 0; k < s.len; ++k) {
            const std::size_t kk = (k + shift) % s.len;
            const std::size_t from = (o * s.len + k) * s.inner;
            const std::size_t to = (o * s.len + kk) * s.inner;
            std::copy_n(src.begin() + from, s.inner, dst.begin() + to);
        }
    return out;
}

// Zero-pads (appends) along an axis up to `new_len`.
inline ComplexTensor zero_pad(const ComplexTensor& x, std::size_t axis, std::size_t new_len) {
    const AxisSplit s = split_axis(x.shape(), axis);
    if (new_len < s.len) throw ShapeError("zero_pad: target length smaller than axis length");
    Shape shape = x.shape();
    shape[axis] = new_len;
    ComplexTensor out(shape);
    auto src = x.data();
    auto dst = out.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        std::copy_n(src.begin() + o * s.len * s.inner, s.len * s.inner, dst.begin() + o * new_len * s.inner);
    return out;
}

// Keeps indices [start, start + len) along an axis.
inline ComplexTensor slice(const ComplexTensor& x, std::size_t axis, std::size_t start, std::size_t len) {
    const AxisSplit s = split_axis(x.shape(), axis);
    if (start + len > s.len)
        throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + len) +
                         ") exceeds axis length " + std::to_string(s.len));
    Shape shape = x.shape();
    shape[axis] = len;
    ComplexTensor out(shape);
    auto src = x.data();
    auto dst = out.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        std::copy_n(src.begin() + (o * s.len + start) * s.inner, len * s.inner, dst.begin() + o * len * s.inner);
    return out;
}

}  // namespace radpose
