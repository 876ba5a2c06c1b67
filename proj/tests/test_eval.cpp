#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "radpose/eval.hpp"

using namespace radpose;

namespace {

Skeleton2D random_skeleton(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(20, 230);
    Skeleton2D s;
    for (auto& p : s.coords) p = {u(rng), u(rng)};
    return s;
}

// AP of one fixed ranking straight from the definition: precision at every
// correct rank, summed and divided by the number of frames.
double ap_of_ranking(const std::vector<ScoredFrame>& f, const std::vector<std::size_t>& order, double t) {
    double ap = 0;
    std::size_t tp = 0;
    for (std::size_t r = 0; r < order.size(); ++r)
        if (f[order[r]].oks > t) {
            ++tp;
            ap += double(tp) / double(r + 1);
        }
    return ap / double(f.size());
}

// Enumerates every ordering consistent with descending confidence and
// averages their AP.
double brute_force_ap(const std::vector<ScoredFrame>& f, double t) {
    std::vector<std::size_t> order(f.size());
    std::iota(order.begin(), order.end(), 0);
    double total = 0;
    std::size_t count = 0;
    do {
        bool sorted = true;
        for (std::size_t r = 1; r < order.size(); ++r) sorted = sorted && f[order[r - 1]].confidence >= f[order[r]].confidence;
        if (!sorted) continue;
        total += ap_of_ranking(f, order, t);
        ++count;
    } while (std::next_permutation(order.begin(), order.end()));
    return total / double(count);
}

}  // namespace

TEST(Oks, IdenticalIsOne) {
    std::mt19937_64 rng(1);
    const auto s = random_skeleton(rng);
    EXPECT_EQ(oks(s, s), 1.0);
}

TEST(Oks, FarAwayTendsToZero) {
    std::mt19937_64 rng(2);
    auto gt = random_skeleton(rng), pred = gt;
    for (auto& p : pred.coords) p.x += 1e4;
    EXPECT_LT(oks(pred, gt), 1e-12);
}

TEST(Oks, SingleKeypointAtScaleTimesRootTwo) {
    Skeleton2D gt, pred;
    gt.visible.fill(false);
    gt.visible[kLElbow] = true;
    const OksConfig cfg;
    const double s = 40.0;
    const double d = s * cfg.k[kLElbow] * std::sqrt(2.0);
    pred.coords[kLElbow] = {gt.coords[kLElbow].x + d * 0.6, gt.coords[kLElbow].y + d * 0.8};
    EXPECT_NEAR(oks(pred, gt, cfg, {}, s * s), std::exp(-1.0), 1e-12);
}

TEST(Oks, TranslationInvariant) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
        auto gt = random_skeleton(rng), pred = random_skeleton(rng);
        const double v = oks(pred, gt);
        for (auto* s : {&gt, &pred})
            for (auto& p : s->coords) p = {p.x + 7.25, p.y - 3.5};
        EXPECT_NEAR(oks(pred, gt), v, 1e-12);
    }
}

TEST(Oks, ScaleConsistent) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 10; ++t) {
        auto gt = random_skeleton(rng), pred = gt;
        std::normal_distribution<double> n(0, 4);
        for (auto& p : pred.coords) p = {p.x + n(rng), p.y + n(rng)};
        const double v = oks(pred, gt);
        for (auto* s : {&gt, &pred})
            for (auto& p : s->coords) p = {p.x * 0.5, p.y * 0.5};
        EXPECT_NEAR(oks(pred, gt), v, 1e-12);
    }
}

TEST(Oks, Errors) {
    Skeleton2D s;
    s.visible.fill(false);
    EXPECT_THROW(oks(s, s, {}, {}, 1.0), Error);
    Skeleton2D flat;
    for (auto& p : flat.coords) p = {10, 10};
    EXPECT_THROW(oks(flat, flat), Error);
    OksConfig bad;
    bad.k[3] = 0;
    EXPECT_THROW(bad.validate(), Error);
}

TEST(AveragePrecision, PerfectIsHundred) {
    std::vector<ScoredFrame> f(7, {1.0, 0.5});
    const auto thr = default_oks_thresholds();
    const auto r = average_precision(f, thr);
    EXPECT_EQ(r.ap, 100.0);
    EXPECT_EQ(r.ap50, 100.0);
    EXPECT_EQ(r.ap75, 100.0);
}

TEST(AveragePrecision, ThresholdCountingMicroCase) {
    std::vector<ScoredFrame> f{{0.6, 0.9}, {0.6, 0.3}, {0.6, 0.7}};
    const auto thr = default_oks_thresholds();
    const auto r = average_precision(f, thr);
    EXPECT_EQ(r.ap50, 100.0);
    EXPECT_EQ(r.ap75, 0.0);
    EXPECT_EQ(r.ap, 20.0);
}

TEST(AveragePrecision, ThresholdsAreExactDecimals) {
    const auto thr = default_oks_thresholds();
    ASSERT_EQ(thr.size(), 10u);
    EXPECT_EQ(thr[2], 0.6);
    EXPECT_EQ(thr[5], 0.75);
    EXPECT_EQ(thr[9], 0.95);
}

TEST(AveragePrecision, MatchesBruteForceOracle) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 3 + trial % 4;
        std::vector<ScoredFrame> f(n);
        // Few distinct confidence levels so tie blocks are common.
        for (auto& s : f) s = {u(rng), double(int(u(rng) * 3))};
        for (double t : {0.3, 0.5, 0.8}) EXPECT_NEAR(ap_at(f, t), brute_force_ap(f, t), 1e-12);
    }
}

TEST(AveragePrecision, HandBuiltThreeFrames) {
    // Ranked: correct, wrong, correct -> (1/1 + 2/3) / 3.
    std::vector<ScoredFrame> f{{0.9, 0.8}, {0.2, 0.5}, {0.7, 0.1}};
    EXPECT_NEAR(ap_at(f, 0.5), (1.0 + 2.0 / 3.0) / 3.0, 1e-15);
    EXPECT_NEAR(ap_at(f, 0.5), brute_force_ap(f, 0.5), 1e-15);
    EXPECT_NEAR(ap_at(f, 0.5, false), 2.0 / 3.0, 1e-15);
}

TEST(AveragePrecision, MonotoneInThreshold) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<ScoredFrame> f(50);
    for (auto& s : f) s = {u(rng), u(rng)};
    double prev = 2;
    for (double t = 0; t <= 1.0; t += 0.01) {
        const double v = ap_at(f, t);
        EXPECT_LE(v, prev + 1e-15);
        prev = v;
    }
}

TEST(AveragePrecision, InvariantToTiedPermutation) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<ScoredFrame> f(12);
    for (auto& s : f) s = {u(rng), double(int(u(rng) * 2))};
    const double ref = ap_at(f, 0.5);
    for (int t = 0; t < 20; ++t) {
        std::shuffle(f.begin(), f.end(), rng);
        EXPECT_NEAR(ap_at(f, 0.5), ref, 1e-14);
    }
}

TEST(AveragePrecision, EmptyThrows) {
    const auto thr = default_oks_thresholds();
    EXPECT_THROW(average_precision({}, thr), Error);
    std::vector<PosePair> none;
    EXPECT_THROW(evaluate(none), Error);
}

TEST(Evaluate, GroundTruthAgainstItselfIsHundred) {
    std::mt19937_64 rng(8);
    std::vector<PosePair> pairs;
    for (int i = 0; i < 10; ++i) {
        const auto s = random_skeleton(rng);
        pairs.push_back({s, s, 0.5});
    }
    const auto r = evaluate(pairs);
    EXPECT_EQ(r.total.ap, 100.0);
    for (double v : r.keypoint_ap) EXPECT_EQ(v, 100.0);
    for (double v : r.group_ap) EXPECT_EQ(v, 100.0);
    const auto j = report_to_json(r);
    EXPECT_EQ(j["keypoints"].size(), 14u);
    EXPECT_EQ(j["groups"].size(), 8u);
    const std::string table = report_table(r);
    EXPECT_EQ(table.substr(0, table.find('\n')),
              "Model\tHead\tNeck\tShoulder\tElbow\tWrist\tHip\tKnee\tAnkle\tAP\tAP50\tAP75");
}

TEST(Evaluate, GroupsPairLeftAndRight) {
    EXPECT_EQ(group_keypoints(0), (std::vector<std::size_t>{kHead}));
    EXPECT_EQ(group_keypoints(1), (std::vector<std::size_t>{kNeck}));
    EXPECT_EQ(group_keypoints(4), (std::vector<std::size_t>{kRWrist, kLWrist}));
    EXPECT_EQ(group_keypoints(7), (std::vector<std::size_t>{kRAnkle, kLAnkle}));
}

TEST(Mpjpe, Basics) {
    std::vector<double> a(42), b(42);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-500, 500);
    for (auto& v : a) v = u(rng);
    EXPECT_EQ(mpjpe(a, a).total, 0.0);
    for (std::size_t i = 0; i < 42; ++i) b[i] = a[i] + (i % 3 == 1 ? 10.0 : 0.0);
    EXPECT_NEAR(mpjpe(b, a).total, 10.0, 1e-12);
    EXPECT_THROW(mpjpe(std::span<const double>(a).first(39), b), ShapeError);
}

TEST(Mpjpe, MatchesNaiveLoop) {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(-500, 500);
    std::vector<double> a(42), b(42);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    double total = 0;
    for (int j = 0; j < 14; ++j) {
        double s = 0;
        for (int d = 0; d < 3; ++d) s += (a[3 * j + d] - b[3 * j + d]) * (a[3 * j + d] - b[3 * j + d]);
        total += std::sqrt(s);
        EXPECT_NEAR(mpjpe(a, b).per_joint[j], std::sqrt(s), 1e-12 * std::sqrt(s));  // fma contraction may differ
    }
    EXPECT_NEAR(mpjpe(a, b).total, total / 14, 1e-12);
}
