#pragma once

// Keypoint similarity, ranked average precision and joint position error.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "radpose/skeleton.hpp"

namespace radpose {

// COCO per-keypoint sigmas on the 14-point layout; the neck borrows the
// shoulder value.  The falloff constant is k = 2 sigma.
inline constexpr std::array<double, kNumKeypoints> kCocoSigmas = {
    0.026, 0.079, 0.079, 0.079, 0.072, 0.072, 0.062, 0.062, 0.107, 0.107, 0.087, 0.087, 0.089, 0.089,
};

struct OksConfig {
    std::array<double, kNumKeypoints> k{};
    bool ranked = true;  // false: AP@t is the plain fraction of frames with OKS > t

    OksConfig() {
        for (std::size_t c = 0; c < kNumKeypoints; ++c) k[c] = 2.0 * kCocoSigmas[c];
    }

    void validate() const {
        for (double v : k)
            if (!(v > 0)) throw Error("OksConfig: falloff constants must be positive");
    }
};

// Area of the bounding box around the visible ground-truth keypoints.
inline double gt_box_area(const Skeleton2D& gt) {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (std::size_t c = 0; c < kNumKeypoints; ++c) {
        if (!gt.visible[c]) continue;
        x0 = std::min(x0, gt.coords[c].x);
        x1 = std::max(x1, gt.coords[c].x);
        y0 = std::min(y0, gt.coords[c].y);
        y1 = std::max(y1, gt.coords[c].y);
    }
    return x1 >= x0 ? (x1 - x0) * (y1 - y0) : 0.0;
}

// OKS restricted to the keypoints where `mask` is true (all when empty).
// `s2` overrides the scale; by default it is the GT box area.
inline double oks(const Skeleton2D& pred, const Skeleton2D& gt, const OksConfig& cfg = {},
                  std::span<const bool> mask = {}, double s2 = -1) {
    if (s2 < 0) s2 = gt_box_area(gt);
    if (!(s2 > 0)) throw Error("oks: ground-truth box has zero area");
    double num = 0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < kNumKeypoints; ++c) {
        if (!gt.visible[c] || (!mask.empty() && !mask[c])) continue;
        const double dx = pred.coords[c].x - gt.coords[c].x, dy = pred.coords[c].y - gt.coords[c].y;
        num += std::exp(-(dx * dx + dy * dy) / (2.0 * s2 * cfg.k[c] * cfg.k[c]));
        ++n;
    }
    if (n == 0) throw Error("oks: no visible keypoints");
    return num / static_cast<double>(n);
}

inline std::vector<double> default_oks_thresholds() {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) t.push_back((50.0 + 5.0 * i) / 100.0);
    return t;
}

struct ScoredFrame {
    double oks = 0;
    double confidence = 0;
};

// AP at one threshold over single-person frames.  A frame is correct when its
// OKS strictly exceeds t, so OKS 0.6 fails the 0.60 threshold.  Frames are
// ranked by confidence; each correct frame contributes the precision at its
// rank over n_gt = frames.size().  Within a block of equal confidences the
// result is the expectation over all orderings of the block, so AP does not
// depend on input order.
inline double ap_at(std::span<const ScoredFrame> frames, double t, bool ranked = true) {
    if (frames.empty()) throw Error("average_precision: no frames");
    const double n_gt = static_cast<double>(frames.size());
    if (!ranked) {
        std::size_t tp = 0;
        for (const auto& f : frames) tp += f.oks > t;
        return static_cast<double>(tp) / n_gt;
    }
    std::vector<std::size_t> order(frames.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return frames[a].confidence > frames[b].confidence; });
    double ap = 0;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i, k = 0;
        while (j < order.size() && frames[order[j]].confidence == frames[order[i]].confidence) {
            k += frames[order[j]].oks > t;
            ++j;
        }
        const std::size_t m = j - i;
        if (k > 0) {
            // Slot p of the block is correct with probability k/m; given that,
            // the p-1 slots before it hold (p-1)(k-1)/(m-1) correct frames on
            // average.
            const double km = static_cast<double>(k) / static_cast<double>(m);
            const double share = m > 1 ? static_cast<double>(k - 1) / static_cast<double>(m - 1) : 0.0;
            for (std::size_t p = 1; p <= m; ++p)
                ap += km * (static_cast<double>(tp) + 1.0 + static_cast<double>(p - 1) * share) /
                      static_cast<double>(i + p);
        }
        tp += k;
        i = j;
    }
    return ap / n_gt;
}

struct ApResult {
    std::vector<double> per_threshold;  // fractions in [0, 1]
    double ap = 0, ap50 = 0, ap75 = 0;  // percentages
};

inline ApResult average_precision(std::span<const ScoredFrame> frames, std::span<const double> thresholds,
                                  bool ranked = true) {
    if (thresholds.empty()) throw Error("average_precision: no thresholds");
    ApResult r;
    for (double t : thresholds) r.per_threshold.push_back(ap_at(frames, t, ranked));
    r.ap = 100.0 * std::accumulate(r.per_threshold.begin(), r.per_threshold.end(), 0.0) /
           static_cast<double>(r.per_threshold.size());
    r.ap50 = 100.0 * ap_at(frames, 0.5, ranked);
    r.ap75 = 100.0 * ap_at(frames, 0.75, ranked);
    return r;
}

struct PosePair {
    Skeleton2D pred, gt;
    double confidence = 0;
};

// Column groups of the report: left and right keypoints share a column.
inline constexpr std::array<std::string_view, 8> kReportGroups = {"Head", "Neck",  "Shoulder", "Elbow",
                                                                  "Wrist", "Hip", "Knee",     "Ankle"};

inline std::vector<std::size_t> group_keypoints(std::size_t g) {
    if (g < 2) return {g};
    return {2 * g - 2, 2 * g - 1};
}

struct EvalReport {
    std::size_t frames = 0;
    std::array<double, kNumKeypoints> keypoint_ap{};  // percent
    std::array<double, kReportGroups.size()> group_ap{};
    ApResult total;
    double mean_pixel_error = 0;
};

inline EvalReport evaluate(std::span<const PosePair> pairs, const OksConfig& cfg = {}) {
    if (pairs.empty()) throw Error("evaluate: no frames");
    cfg.validate();
    const auto thr = default_oks_thresholds();
    EvalReport rep;
    rep.frames = pairs.size();
    auto score = [&](std::span<const bool> mask) {
        std::vector<ScoredFrame> fs;
        for (const auto& p : pairs) {
            bool any = mask.empty();
            for (std::size_t c = 0; !any && c < kNumKeypoints; ++c) any = mask[c] && p.gt.visible[c];
            if (!any) continue;
            fs.push_back({oks(p.pred, p.gt, cfg, mask), p.confidence});
        }
        if (fs.empty()) return ApResult{};
        return average_precision(fs, thr, cfg.ranked);
    };
    rep.total = score({});
    for (std::size_t c = 0; c < kNumKeypoints; ++c) {
        std::array<bool, kNumKeypoints> m{};
        m[c] = true;
        rep.keypoint_ap[c] = score(m).ap;
    }
    for (std::size_t g = 0; g < kReportGroups.size(); ++g) {
        std::array<bool, kNumKeypoints> m{};
        for (std::size_t c : group_keypoints(g)) m[c] = true;
        rep.group_ap[g] = score(m).ap;
    }
    double err = 0;
    std::size_t n = 0;
    for (const auto& p : pairs)
        for (std::size_t c = 0; c < kNumKeypoints; ++c)
            if (p.gt.visible[c]) {
                err += std::hypot(p.pred.coords[c].x - p.gt.coords[c].x, p.pred.coords[c].y - p.gt.coords[c].y);
                ++n;
            }
    rep.mean_pixel_error = n ? err / static_cast<double>(n) : 0.0;
    return rep;
}

inline std::string fmt1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

// One header line and one row, columns as in the comparison tables.
inline std::string report_table(const EvalReport& r, const std::string& label = "model") {
    std::string head = "Model", row = label;
    for (std::size_t g = 0; g < kReportGroups.size(); ++g) {
        head += "\t" + std::string(kReportGroups[g]);
        row += "\t" + fmt1(r.group_ap[g]);
    }
    head += "\tAP\tAP50\tAP75";
    row += "\t" + fmt1(r.total.ap) + "\t" + fmt1(r.total.ap50) + "\t" + fmt1(r.total.ap75);
    return head + "\n" + row + "\n";
}

// Per-keypoint AP, all 14 keypoints, header plus one row.
inline std::string keypoint_table(const EvalReport& r, const std::string& label = "model") {
    std::string head = "Model", row = label;
    for (std::size_t c = 0; c < kNumKeypoints; ++c) {
        head += "\t" + std::string(kKeypointNames[c]);
        row += "\t" + fmt1(r.keypoint_ap[c]);
    }
    return head + "\n" + row + "\n";
}

// AP values are rounded to one decimal, so reports are stable text.
inline nlohmann::json report_to_json(const EvalReport& r) {
    auto r1 = [](double v) { return std::round(v * 10.0) / 10.0; };
    nlohmann::json kp = nlohmann::json::object(), groups = nlohmann::json::object();
    for (std::size_t c = 0; c < kNumKeypoints; ++c) kp[std::string(kKeypointNames[c])] = r1(r.keypoint_ap[c]);
    for (std::size_t g = 0; g < kReportGroups.size(); ++g) groups[std::string(kReportGroups[g])] = r1(r.group_ap[g]);
    return {{"frames", r.frames},
            {"keypoints", kp},
            {"groups", groups},
            {"AP", r1(r.total.ap)},
            {"AP50", r1(r.total.ap50)},
            {"AP75", r1(r.total.ap75)},
            {"mean_pixel_error", std::round(r.mean_pixel_error * 1000.0) / 1000.0}};
}

// ---------------------------------------------------------------------------

struct Mpjpe {
    double total = 0;
    std::vector<double> per_joint;
};

// Mean Euclidean distance per joint; inputs are flat xyz triples in mm.
inline Mpjpe mpjpe(std::span<const double> pred, std::span<const double> gt) {
    if (pred.size() != gt.size() || pred.size() % 3 != 0)
        throw ShapeError("mpjpe: keypoint counts differ (" + std::to_string(pred.size()) + " vs " +
                         std::to_string(gt.size()) + " values)");
    Mpjpe m;
    const std::size_t n = pred.size() / 3;
    for (std::size_t j = 0; j < n; ++j) {
        const double dx = pred[3 * j] - gt[3 * j], dy = pred[3 * j + 1] - gt[3 * j + 1],
                     dz = pred[3 * j + 2] - gt[3 * j + 2];
        m.per_joint.push_back(std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    m.total = n ? std::accumulate(m.per_joint.begin(), m.per_joint.end(), 0.0) / static_cast<double>(n) : 0.0;
    return m;
}

}  // namespace radpose
