#pragma once

// Raster images of heatmaps, radar maps and skeletons.  Encoding to an
// image file is left to the caller.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "radpose/preproc.hpp"
#include "radpose/skeleton.hpp"

namespace radpose {

struct Image {
    std::size_t width = 0, height = 0, channels = 1;  // 1 = gray, 3 = RGB
    std::vector<std::uint8_t> pixels;                  // row-major, interleaved

    Image() = default;
    Image(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

    std::uint8_t* at(std::size_t x, std::size_t y) { return pixels.data() + (y * width + x) * channels; }
    const std::uint8_t* at(std::size_t x, std::size_t y) const { return pixels.data() + (y * width + x) * channels; }
};

// Gray image of an (H, W) plane, linearly mapped so the largest value is
// 255 and anything <= 0 is black.
inline Image plane_image(std::span<const double> plane, std::size_t h, std::size_t w) {
    if (plane.size() != h * w) throw ShapeError("plane_image: plane size does not match H x W");
    double peak = 0;
    for (double v : plane) peak = std::max(peak, v);
    Image img(w, h, 1);
    for (std::size_t i = 0; i < h * w; ++i) {
        const double v = peak > 0 ? std::clamp(plane[i] / peak, 0.0, 1.0) : 0.0;
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return img;
}

// The displayed plane of a map file.  Heatmaps give channel `channel`, or the
// per-pixel maximum over channels when channel < 0.  Radar maps give the
// magnitude summed over velocity bins and elevation, as a range x azimuth
// image.
inline std::vector<double> map_plane(const RadarMap& m, int channel, std::size_t* h, std::size_t* w) {
    const Tensor<double>& t = m.data;
    if (m.kind == MapKind::kHeatmap) {
        const std::size_t C = t.dim(0), H = t.dim(1), W = t.dim(2);
        if (channel >= static_cast<int>(C)) throw Error("render: channel " + std::to_string(channel) + " out of range");
        std::vector<double> out(H * W, channel < 0 ? -INFINITY : 0.0);
        for (std::size_t c = 0; c < C; ++c) {
            if (channel >= 0 && c != static_cast<std::size_t>(channel)) continue;
            for (std::size_t i = 0; i < H * W; ++i) out[i] = std::max(out[i], t[c * H * W + i]);
        }
        *h = H;
        *w = W;
        return out;
    }
    const std::size_t K = t.dim(1), H = t.dim(2), W = t.dim(3), E = t.rank() == 5 ? t.dim(4) : 1;
    const std::size_t half = K * H * W * E;
    std::vector<double> out(H * W, 0.0);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t i = 0; i < H * W; ++i)
            for (std::size_t e = 0; e < E; ++e) {
                const std::size_t idx = (k * H * W + i) * E + e;
                out[i] += std::hypot(t[idx], t[half + idx]);
            }
    *h = H;
    *w = W;
    return out;
}

// Nearest-neighbour enlargement by an integer factor.
inline Image upscale(const Image& src, std::size_t factor) {
    if (factor <= 1) return src;
    Image out(src.width * factor, src.height * factor, src.channels);
    for (std::size_t y = 0; y < out.height; ++y)
        for (std::size_t x = 0; x < out.width; ++x)
            std::copy_n(src.at(x / factor, y / factor), src.channels, out.at(x, y));
    return out;
}

using Rgb = std::array<std::uint8_t, 3>;

inline void draw_line(Image& img, double x0, double y0, double x1, double y1, const Rgb& color) {
    const double len = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
    const auto n = static_cast<std::size_t>(std::ceil(len)) + 1;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
        const auto x = static_cast<std::ptrdiff_t>(std::lround(x0 + t * (x1 - x0)));
        const auto y = static_cast<std::ptrdiff_t>(std::lround(y0 + t * (y1 - y0)));
        if (x < 0 || y < 0 || x >= static_cast<std::ptrdiff_t>(img.width) || y >= static_cast<std::ptrdiff_t>(img.height))
            continue;
        std::copy_n(color.begin(), 3, img.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)));
    }
}

// Skeleton edges and 3 x 3 joint markers on an RGB image in camera
// coordinates; invisible joints and their edges are skipped.
inline void draw_skeleton(Image& img, const Skeleton2D& sk, const Rgb& color) {
    if (img.channels != 3) throw Error("draw_skeleton: expected an RGB image");
    for (auto [a, b] : SkeletonGraph::kEdges)
        if (sk.visible[a] && sk.visible[b])
            draw_line(img, sk.coords[a].x, sk.coords[a].y, sk.coords[b].x, sk.coords[b].y, color);
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
        if (!sk.visible[k]) continue;
        for (int dy = -1; dy <= 1; ++dy)
            draw_line(img, sk.coords[k].x - 1, sk.coords[k].y + dy, sk.coords[k].x + 1, sk.coords[k].y + dy, color);
    }
}

}  // namespace radpose
