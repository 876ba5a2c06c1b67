#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "radpose/skeleton.hpp"

using namespace radpose;

TEST(SkeletonGraph, Structure) {
    const auto& g = adjacency();
    const auto& a = g.adjacency();
    std::size_t edges = 0;
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        EXPECT_EQ(a[i][i], 0);
        for (std::size_t j = 0; j < kNumKeypoints; ++j) {
            EXPECT_EQ(a[i][j], a[j][i]);
            edges += static_cast<std::size_t>(a[i][j]);
        }
    }
    EXPECT_EQ(edges / 2, SkeletonGraph::kEdges.size());
    EXPECT_EQ(g.degree(kNeck), 5u);  // head, both shoulders, both hips
    EXPECT_EQ(g.degree(kRWrist), 1u);
    EXPECT_EQ(g.max_degree(), 5u);
    for (auto d : g.hops_from(kHead)) EXPECT_NE(d, SIZE_MAX);  // connected
    EXPECT_EQ(g.hops_from(kHead)[kRWrist], 4u);
}

TEST(SkeletonGraph, AHatAddsSelfLoops) {
    const auto m = adjacency().a_hat<double>();
    for (std::size_t i = 0; i < kNumKeypoints; ++i) EXPECT_EQ(m[i * kNumKeypoints + i], 1.0);
    EXPECT_EQ(m[kHead * kNumKeypoints + kNeck], 1.0);
    EXPECT_EQ(m[kHead * kNumKeypoints + kLAnkle], 0.0);
}

TEST(Heatmaps, PeakAtKeypointCell) {
    Skeleton2D sk;
    for (std::size_t k = 0; k < kNumKeypoints; ++k) sk.coords[k] = {8.0 * double(k) + 3.0, 255.9 - 9.0 * double(k)};
    const auto hm = gt_heatmaps<double>(sk, 32, 32);
    EXPECT_EQ(hm.shape(), (Shape{14, 32, 32}));
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
        const std::size_t i = camera_to_cell(sk.coords[k].y, 32), j = camera_to_cell(sk.coords[k].x, 32);
        EXPECT_EQ(hm.at({k, i, j}), 1.0);
        for (std::size_t c = 0; c < 32 * 32; ++c) EXPECT_LE(hm[k * 1024 + c], 1.0);
    }
}

TEST(Heatmaps, GaussianFalloff) {
    Skeleton2D sk;
    for (auto& p : sk.coords) p = {100.0, 100.0};  // cell (12, 12) on a 32 grid
    const auto hm = gt_heatmaps<double>(sk, 32, 32, 2.0);
    EXPECT_NEAR(hm.at({0, 12, 14}), std::exp(-4.0 / 8.0), 1e-15);
    EXPECT_NEAR(hm.at({0, 15, 16}), std::exp(-25.0 / 8.0), 1e-15);
}

TEST(Heatmaps, InvisibleKeypointIsZero) {
    Skeleton2D sk;
    sk.visible[kLKnee] = false;
    const auto hm = gt_heatmaps<float>(sk, 16, 16);
    for (std::size_t c = 0; c < 256; ++c) EXPECT_EQ(hm[kLKnee * 256 + c], 0.0f);
    EXPECT_EQ(sk.visible_count(), 13u);
}

TEST(Heatmaps, ExtractRoundTripsCellCentres) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 255.99);
    for (std::size_t n : {16u, 32u, 64u}) {
        for (int trial = 0; trial < 20; ++trial) {
            Skeleton2D sk;
            for (auto& p : sk.coords) p = {u(rng), u(rng)};
            const auto pose = extract_keypoints(gt_heatmaps<double>(sk, n, n));
            const double cell = 256.0 / double(n);
            for (std::size_t k = 0; k < kNumKeypoints; ++k) {
                EXPECT_LE(std::abs(pose.skeleton.coords[k].x - sk.coords[k].x), cell / 2 + 1e-9);
                EXPECT_LE(std::abs(pose.skeleton.coords[k].y - sk.coords[k].y), cell / 2 + 1e-9);
                EXPECT_EQ(pose.confidence[k], 1.0);
            }
            EXPECT_EQ(pose.mean_confidence(), 1.0);
        }
    }
}

TEST(Heatmaps, TranslationCovariance) {
    // Shifting a keypoint by whole cells shifts its heatmap by the same amount.
    Skeleton2D a, b;
    for (auto& p : a.coords) p = {40.0, 60.0};
    for (auto& p : b.coords) p = {40.0 + 3 * 8.0, 60.0 + 2 * 8.0};
    const auto ha = gt_heatmaps<double>(a, 32, 32), hb = gt_heatmaps<double>(b, 32, 32);
    for (std::size_t i = 0; i + 2 < 32; ++i)
        for (std::size_t j = 0; j + 3 < 32; ++j) EXPECT_EQ(ha.at({0, i, j}), hb.at({0, i + 2, j + 3}));
}

TEST(Extract, TiesGoToFirstIndex) {
    std::vector<double> hm(kNumKeypoints * 4 * 4, 0.5);
    const auto pose = extract_keypoints<double>(hm, 4, 4);
    EXPECT_EQ(pose.skeleton.coords[0], (Point2{32.0, 32.0}));
    EXPECT_THROW(extract_keypoints<double>(std::span<const double>(hm).first(10), 4, 4), ShapeError);
}
