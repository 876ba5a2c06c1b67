#pragma once

// The 14-keypoint human skeleton: graph, ground-truth heatmaps, and the
// camera <-> heatmap-grid coordinate mapping.

#include <array>
#include <cmath>
#include <queue>
#include <string_view>
#include <vector>

#include "radpose/tensor.hpp"

namespace radpose {

inline constexpr std::size_t kNumKeypoints = 14;
inline constexpr double kCameraSize = 256.0;  // virtual camera is 256 x 256 pixels

enum Keypoint : std::size_t {
    kHead,
    kNeck,
    kRShoulder,
    kLShoulder,
    kRElbow,
    kLElbow,
    kRWrist,
    kLWrist,
    kRHip,
    kLHip,
    kRKnee,
    kLKnee,
    kRAnkle,
    kLAnkle,
};

inline constexpr std::array<std::string_view, kNumKeypoints> kKeypointNames = {
    "head",    "neck",    "r_shoulder", "l_shoulder", "r_elbow", "l_elbow", "r_wrist",
    "l_wrist", "r_hip",   "l_hip",      "r_knee",     "l_knee",  "r_ankle", "l_ankle",
};

struct Point2 {
    double x = 0;
    double y = 0;
    bool operator==(const Point2&) const = default;
};

struct Skeleton2D {
    std::array<Point2, kNumKeypoints> coords{};  // camera pixels, [0, 256)
    std::array<bool, kNumKeypoints> visible{};

    Skeleton2D() { visible.fill(true); }
    bool operator==(const Skeleton2D&) const = default;

    std::size_t visible_count() const {
        std::size_t n = 0;
        for (bool v : visible) n += v;
        return n;
    }
};

// Clamps a camera coordinate into [0, 256).
inline double clamp_camera(double v) {
    return std::clamp(v, 0.0, std::nextafter(kCameraSize, 0.0));
}

// ---------------------------------------------------------------------------

class SkeletonGraph {
   public:
    using Matrix = std::array<std::array<int, kNumKeypoints>, kNumKeypoints>;

    static constexpr std::array<std::pair<Keypoint, Keypoint>, 14> kEdges = {{
        {kHead, kNeck},
        {kNeck, kRShoulder},
        {kNeck, kLShoulder},
        {kRShoulder, kRElbow},
        {kLShoulder, kLElbow},
        {kRElbow, kRWrist},
        {kLElbow, kLWrist},
        {kNeck, kRHip},
        {kNeck, kLHip},
        {kRHip, kLHip},
        {kRHip, kRKnee},
        {kLHip, kLKnee},
        {kRKnee, kRAnkle},
        {kLKnee, kLAnkle},
    }};

    SkeletonGraph() {
        for (auto& row : adj_) row.fill(0);
        for (auto [a, b] : kEdges) adj_[a][b] = adj_[b][a] = 1;
    }

    const Matrix& adjacency() const { return adj_; }

    // A + I, row-major, as the scalar type used by the model.
    template <class T>
    std::vector<T> a_hat() const {
        std::vector<T> m(kNumKeypoints * kNumKeypoints);
        for (std::size_t i = 0; i < kNumKeypoints; ++i)
            for (std::size_t j = 0; j < kNumKeypoints; ++j) m[i * kNumKeypoints + j] = T(adj_[i][j] + (i == j));
        return m;
    }

    std::size_t degree(std::size_t i) const {
        std::size_t d = 0;
        for (int v : adj_[i]) d += static_cast<std::size_t>(v);
        return d;
    }

    std::size_t max_degree() const {
        std::size_t d = 0;
        for (std::size_t i = 0; i < kNumKeypoints; ++i) d = std::max(d, degree(i));
        return d;
    }

    // Hop distances from `src` (SIZE_MAX when unreachable).
    std::array<std::size_t, kNumKeypoints> hops_from(std::size_t src) const {
        std::array<std::size_t, kNumKeypoints> dist;
        dist.fill(SIZE_MAX);
        std::queue<std::size_t> q;
        dist[src] = 0;
        q.push(src);
        while (!q.empty()) {
            const std::size_t u = q.front();
            q.pop();
            for (std::size_t v = 0; v < kNumKeypoints; ++v)
                if (adj_[u][v] && dist[v] == SIZE_MAX) {
                    dist[v] = dist[u] + 1;
                    q.push(v);
                }
        }
        return dist;
    }

   private:
    Matrix adj_{};
};

inline const SkeletonGraph& adjacency() {
    static const SkeletonGraph g;
    return g;
}

// ---------------------------------------------------------------------------
// Heatmaps.  Grid cell (i, j) of an H x W heatmap covers camera pixels
// [j * 256/W, (j+1) * 256/W) x [i * 256/H, (i+1) * 256/H).

inline std::size_t camera_to_cell(double v, std::size_t n) {
    const double cell = kCameraSize / static_cast<double>(n);
    const auto k = static_cast<std::ptrdiff_t>(std::floor(v / cell));
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

inline double cell_to_camera(std::size_t k, std::size_t n) {
    return (static_cast<double>(k) + 0.5) * kCameraSize / static_cast<double>(n);
}

// Unit-peak Gaussian per keypoint, centred on the grid cell holding the
// keypoint.  Invisible keypoints get an all-zero channel.  Writes into `out`
// which must hold 14 * H * W values.
template <class T>
void render_gt_heatmaps(const Skeleton2D& sk, std::size_t h, std::size_t w, double sigma, std::span<T> out) {
    if (!(sigma > 0)) throw Error("gt_heatmaps: sigma must be positive");
    if (out.size() != kNumKeypoints * h * w) throw ShapeError("gt_heatmaps: output buffer size mismatch");
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (std::size_t c = 0; c < kNumKeypoints; ++c) {
        T* plane = out.data() + c * h * w;
        if (!sk.visible[c]) {
            std::fill_n(plane, h * w, T(0));
            continue;
        }
        const double yc = static_cast<double>(camera_to_cell(sk.coords[c].y, h));
        const double xc = static_cast<double>(camera_to_cell(sk.coords[c].x, w));
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                const double di = static_cast<double>(i) - yc, dj = static_cast<double>(j) - xc;
                plane[i * w + j] = static_cast<T>(std::exp(-(di * di + dj * dj) * inv));
            }
    }
}

template <class T>
Tensor<T> gt_heatmaps(const Skeleton2D& sk, std::size_t h, std::size_t w, double sigma = 2.0) {
    Tensor<T> t(Shape{kNumKeypoints, h, w});
    render_gt_heatmaps<T>(sk, h, w, sigma, t.data());
    return t;
}

struct ExtractedPose {
    Skeleton2D skeleton;
    std::array<double, kNumKeypoints> confidence{};

    double mean_confidence() const {
        double s = 0;
        for (double c : confidence) s += c;
        return s / static_cast<double>(kNumKeypoints);
    }
};

// Per-channel argmax (first maximum in row-major order wins) mapped back to
// the camera frame at cell centres.
template <class T>
ExtractedPose extract_keypoints(std::span<const T> heatmaps, std::size_t h, std::size_t w) {
    if (heatmaps.size() != kNumKeypoints * h * w) throw ShapeError("extract_keypoints: expected (14, H, W) heatmaps");
    ExtractedPose out;
    for (std::size_t c = 0; c < kNumKeypoints; ++c) {
        const T* plane = heatmaps.data() + c * h * w;
        std::size_t best = 0;
        for (std::size_t k = 1; k < h * w; ++k)
            if (plane[k] > plane[best]) best = k;
        out.skeleton.coords[c] = {cell_to_camera(best % w, w), cell_to_camera(best / w, h)};
        out.confidence[c] = static_cast<double>(plane[best]);
    }
    return out;
}

template <class T>
ExtractedPose extract_keypoints(const Tensor<T>& heatmaps) {
    if (heatmaps.rank() != 3) throw ShapeError("extract_keypoints: expected (14, H, W) heatmaps");
    return extract_keypoints<T>(heatmaps.data(), heatmaps.dim(1), heatmaps.dim(2));
}

}  // namespace radpose
