#pragma once

// ADC cube -> radar maps: range/doppler/azimuth/elevation FFT chain, the
// velocity-sliced VRDAE map and the chirp-sampled RAE / RA maps.

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "radpose/fft.hpp"
#include "radpose/radar.hpp"

namespace radpose {

enum class Window { kRect, kHann };

// kHeatmap marks (C, H, W) model outputs dumped in the same file format.
enum class MapKind : std::uint8_t { kRA = 0, kRAE = 1, kVRDAE = 2, kHeatmap = 3 };

inline const char* map_kind_name(MapKind k) {
    switch (k) {
        case MapKind::kRA: return "ra";
        case MapKind::kRAE: return "rae";
        case MapKind::kVRDAE: return "vrdae";
        case MapKind::kHeatmap: return "heatmap";
    }
    return "?";
}

inline MapKind parse_map_kind(std::string_view s) {
    if (s == "ra") return MapKind::kRA;
    if (s == "rae") return MapKind::kRAE;
    if (s == "vrdae") return MapKind::kVRDAE;
    throw Error("unknown map kind '" + std::string(s) + "' (expected ra, rae or vrdae)");
}

struct PreprocConfig {
    std::size_t range_start = 8;
    std::size_t range_len = 64;
    std::size_t az_pad = 64;
    std::size_t el_pad = 8;
    std::size_t K = 8;
    // Taper per cube axis: adc, chirp, azimuth, elevation.
    std::array<Window, 4> window{Window::kRect, Window::kRect, Window::kRect, Window::kRect};

    void validate(const Shape& cube) const {
        if (cube.size() != 4) throw ShapeError("preproc: expected a rank-4 ADC cube, got " + shape_str(cube));
        const std::size_t n_adc = cube[0], n_chirps = cube[1], n_az = cube[2], n_el = cube[3];
        if (range_len == 0 || range_start + range_len > n_adc)
            throw Error("preproc: range gate [" + std::to_string(range_start) + ", " +
                        std::to_string(range_start + range_len) + ") out of bounds for " + std::to_string(n_adc) +
                        " range bins");
        if (!is_pow2(n_adc) || !is_pow2(n_chirps))
            throw Error("preproc: ADC sample and chirp counts must be powers of two");
        if (!is_pow2(range_len) || !is_pow2(az_pad) || !is_pow2(el_pad))
            throw Error("preproc: range_len, az_pad and el_pad must be powers of two");
        if (az_pad < n_az || el_pad < n_el) throw Error("preproc: padding smaller than the antenna count");
        if (K < 2 || K % 2 != 0 || K > n_chirps) throw Error("preproc: K must be even with 2 <= K <= n_chirps");
        if (n_chirps % K != 0) throw Error("preproc: n_chirps must be a multiple of K");
    }
};

// A real-valued radar map.  VRDAE and RAE maps are (2, K, H, W, E) with the
// leading axis holding (real, imag); RA maps drop E.  Heatmaps are (C, H, W).
struct RadarMap {
    MapKind kind = MapKind::kVRDAE;
    std::int64_t frame_index = 0;
    Tensor<double> data;
};

namespace detail {

inline void apply_window(ComplexTensor& x, std::size_t axis, Window w) {
    if (w == Window::kRect) return;
    const std::size_t n = x.dim(axis);
    if (n < 2) return;
    std::vector<double> taper(n);
    for (std::size_t i = 0; i < n; ++i)
        taper[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    detail::for_each_axis_line(x, axis, [&](auto& line) {
        for (std::size_t i = 0; i < n; ++i) line[i] *= taper[i];
    });
}

inline ComplexTensor range_stage(ComplexTensor x, const PreprocConfig& cfg) {
    apply_window(x, 0, cfg.window[0]);
    return slice(fft1d(std::move(x), 0), 0, cfg.range_start, cfg.range_len);
}

inline ComplexTensor doppler_stage(ComplexTensor x, const PreprocConfig& cfg) {
    apply_window(x, 1, cfg.window[1]);
    return fftshift(fft1d(std::move(x), 1), 1);
}

inline ComplexTensor angle_stage(ComplexTensor x, std::size_t axis, std::size_t pad, Window w) {
    apply_window(x, axis, w);
    return fftshift(fft1d(zero_pad(x, axis, pad), axis), axis);
}

// Splits complex values into a leading (real, imag) axis.
inline Tensor<double> split_complex(const ComplexTensor& x) {
    Shape shape{2};
    shape.insert(shape.end(), x.shape().begin(), x.shape().end());
    Tensor<double> out(shape);
    auto d = out.data();
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = x[i].real();
        d[n + i] = x[i].imag();
    }
    return out;
}

// Keeps chirps k * (n_chirps / K), k < K, along axis 1.
inline ComplexTensor sample_chirps(const ComplexTensor& x, std::size_t K) {
    const AxisSplit s = split_axis(x.shape(), 1);
    const std::size_t stride = s.len / K;
    Shape shape = x.shape();
    shape[1] = K;
    ComplexTensor out(shape);
    auto src = x.data();
    auto dst = out.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t k = 0; k < K; ++k)
            std::copy_n(src.begin() + (o * s.len + k * stride) * s.inner, s.inner,
                        dst.begin() + (o * K + k) * s.inner);
    return out;
}

// (range, K, az, el) -> (K, range, az, el), matching the model's velocity-first layout.
inline ComplexTensor velocity_first(const ComplexTensor& x) {
    const std::size_t r = x.dim(0), k = x.dim(1), inner = x.numel() / (r * k);
    Shape shape = x.shape();
    std::swap(shape[0], shape[1]);
    ComplexTensor out(shape);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < k; ++j)
            std::copy_n(x.data().begin() + (i * k + j) * inner, inner, out.data().begin() + (j * r + i) * inner);
    return out;
}

}  // namespace detail

// Order in which the four per-axis transforms run.  They act on distinct axes
// and therefore commute; the order is exposed for testing.
enum class Stage { kRange, kDoppler, kAzimuth, kElevation };
inline constexpr std::array<Stage, 4> kDefaultStageOrder{Stage::kRange, Stage::kDoppler, Stage::kAzimuth,
                                                         Stage::kElevation};

// Full range-doppler-azimuth-elevation complex map, shape
// (range_len, n_chirps, az_pad, el_pad).
inline ComplexTensor make_rdae(const AdcCube& cube, const PreprocConfig& cfg,
                               const std::array<Stage, 4>& order = kDefaultStageOrder) {
    cfg.validate(cube.data.shape());
    ComplexTensor x = cube.data;
    for (Stage s : order) {
        switch (s) {
            case Stage::kRange: x = detail::range_stage(std::move(x), cfg); break;
            case Stage::kDoppler: x = detail::doppler_stage(std::move(x), cfg); break;
            case Stage::kAzimuth: x = detail::angle_stage(std::move(x), 2, cfg.az_pad, cfg.window[2]); break;
            case Stage::kElevation: x = detail::angle_stage(std::move(x), 3, cfg.el_pad, cfg.window[3]); break;
        }
    }
    return x;
}

// Range/azimuth/elevation transforms without the doppler FFT, shape
// (range_len, n_chirps, az_pad, el_pad).
inline ComplexTensor make_rae_intermediate(const AdcCube& cube, const PreprocConfig& cfg) {
    cfg.validate(cube.data.shape());
    ComplexTensor x = detail::range_stage(cube.data, cfg);
    x = detail::angle_stage(std::move(x), 2, cfg.az_pad, cfg.window[2]);
    return detail::angle_stage(std::move(x), 3, cfg.el_pad, cfg.window[3]);
}

// The K doppler bins centred on zero velocity of a full RDAE map.  Lets
// several K share one transform.
inline RadarMap vrdae_from_rdae(const ComplexTensor& rdae, std::size_t K, std::int64_t frame_index = 0) {
    const std::size_t n = rdae.dim(1);
    if (K < 2 || K % 2 != 0 || K > n) throw Error("preproc: K must be even with 2 <= K <= n_chirps");
    const ComplexTensor v = slice(rdae, 1, n / 2 - K / 2, K);
    return {MapKind::kVRDAE, frame_index, detail::split_complex(detail::velocity_first(v))};
}

// K doppler bins centred on zero velocity, (2, K, range_len, az_pad, el_pad).
inline RadarMap make_vrdae(const AdcCube& cube, const PreprocConfig& cfg) {
    return vrdae_from_rdae(make_rdae(cube, cfg), cfg.K, cube.frame_index);
}

// K uniformly strided chirps of a make_rae_intermediate result.
inline RadarMap rae_from_intermediate(const ComplexTensor& x, std::size_t K, std::int64_t frame_index = 0) {
    const std::size_t n = x.dim(1);
    if (K < 2 || K % 2 != 0 || K > n || n % K != 0) throw Error("preproc: K must be even and divide n_chirps");
    return {MapKind::kRAE, frame_index, detail::split_complex(detail::velocity_first(detail::sample_chirps(x, K)))};
}

// K uniformly strided chirps without doppler processing, (2, K, range_len, az_pad, el_pad).
inline RadarMap make_rae(const AdcCube& cube, const PreprocConfig& cfg) {
    return rae_from_intermediate(make_rae_intermediate(cube, cfg), cfg.K, cube.frame_index);
}

// RAE with the physical elevation channels summed before any angle
// processing, (2, K, range_len, az_pad).
inline RadarMap make_ra(const AdcCube& cube, const PreprocConfig& cfg) {
    cfg.validate(cube.data.shape());
    const Shape& s = cube.data.shape();
    ComplexTensor summed(Shape{s[0], s[1], s[2], 1});
    for (std::size_t i = 0; i < s[0] * s[1] * s[2]; ++i)
        for (std::size_t q = 0; q < s[3]; ++q) summed[i] += cube.data[i * s[3] + q];
    ComplexTensor x = detail::range_stage(std::move(summed), cfg);
    x = detail::angle_stage(std::move(x), 2, cfg.az_pad, cfg.window[2]);
    x = detail::velocity_first(detail::sample_chirps(x, cfg.K));
    const Tensor<double> t = detail::split_complex(x);
    return {MapKind::kRA, cube.frame_index, Tensor<double>(Shape{2, cfg.K, cfg.range_len, cfg.az_pad}, t.storage())};
}

inline RadarMap make_map(MapKind kind, const AdcCube& cube, const PreprocConfig& cfg) {
    switch (kind) {
        case MapKind::kRA: return make_ra(cube, cfg);
        case MapKind::kRAE: return make_rae(cube, cfg);
        case MapKind::kVRDAE: return make_vrdae(cube, cfg);
        case MapKind::kHeatmap: break;
    }
    throw Error("make_map: not a radar map kind");
}

// Reassembles the complex map from the (real, imag) leading axis.
inline ComplexTensor merge_complex(const Tensor<double>& t) {
    if (t.rank() < 1 || t.dim(0) != 2) throw ShapeError("merge_complex: leading axis must have length 2");
    Shape shape(t.shape().begin() + 1, t.shape().end());
    ComplexTensor out(shape);
    const std::size_t n = out.numel();
    auto d = t.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = {d[i], d[n + i]};
    return out;
}

}  // namespace radpose
