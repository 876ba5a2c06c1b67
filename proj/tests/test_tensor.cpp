#include <gtest/gtest.h>

#include <random>

#include "gradcheck.hpp"
#include "radpose/ops.hpp"
#include "radpose/optim.hpp"
#include "radpose/tensor.hpp"

using namespace radpose;
using radpose::test::TensorD;

TEST(Tensor, ShapeAndDataAgree) {
    TensorD t(Shape{2, 3, 4});
    EXPECT_EQ(t.numel(), 24u);
    EXPECT_THROW(TensorD(Shape{2, 2}, std::vector<double>(3)), ShapeError);
    t.at({1, 2, 3}) = 5.0;
    EXPECT_EQ(t[23], 5.0);
    EXPECT_THROW(t.at({2, 0, 0}), ShapeError);
}

TEST(Tensor, GradHasDataShape) {
    TensorD a(Shape{3, 2}, 1.0, true);
    sum(scale(a, 2.0)).backward();
    ASSERT_EQ(std::as_const(a).grad().size(), a.numel());
    for (double g : std::as_const(a).grad()) EXPECT_EQ(g, 2.0);
}

TEST(Tensor, FiniteCheckModeThrows) {
    debug::check_finite() = true;
    TensorD a(Shape{2}, std::vector<double>{1.0, std::numeric_limits<double>::infinity()});
    EXPECT_THROW(scale(a, 1.0), NumericalError);
    debug::check_finite() = false;
    EXPECT_NO_THROW(scale(a, 1.0));
}

TEST(GradTape, TopologicalOrderAndSingleVisit) {
    TensorD x(Shape{3}, std::vector<double>{1, 2, 3}, true);
    TensorD y = mul(x, x);  // x used twice
    TensorD z = add(y, x);  // and again
    TensorD s = sum(z);
    auto tape = GradTape<double>::build(s.node());
    const auto& order = tape.order();
    ASSERT_EQ(order.size(), 4u);
    for (std::size_t i = 0; i < order.size(); ++i)
        for (const auto& p : order[i]->parents) {
            auto it = std::find(order.begin(), order.end(), p);
            ASSERT_NE(it, order.end());
            EXPECT_LT(static_cast<std::size_t>(it - order.begin()), i);
        }
    EXPECT_EQ(order.back(), s.node());
    s.backward();
    // d/dx (x^2 + x) = 2x + 1
    EXPECT_DOUBLE_EQ(std::as_const(x).grad()[0], 3.0);
    EXPECT_DOUBLE_EQ(std::as_const(x).grad()[2], 7.0);
}

TEST(GradTape, NoGradGuardRecordsNothing) {
    TensorD x(Shape{2}, 1.0, true);
    NoGradGuard g;
    TensorD y = relu(x);
    EXPECT_FALSE(y.requires_grad());
}

TEST(Conv2d, IdentityPointwiseKernel) {
    std::mt19937_64 rng(1);
    TensorD x = test::random_tensor({3, 5, 5}, rng, -1, 1, false);
    TensorD w(Shape{3, 3, 1, 1});
    for (std::size_t c = 0; c < 3; ++c) w.at({c, c, 0, 0}) = 1.0;
    TensorD y = conv2d(x, w, TensorD(Shape{3}, 0.0));
    ASSERT_EQ(y.shape(), x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Conv2d, AllOnesHandSum) {
    TensorD x(Shape{1, 5, 5}, 1.0);
    TensorD w(Shape{1, 1, 3, 3}, 1.0);
    Conv2dParams p;
    p.padding = {1, 1};
    TensorD y = conv2d(x, w, TensorD(), p);
    ASSERT_EQ(y.shape(), (Shape{1, 5, 5}));
    EXPECT_EQ(y.at({0, 2, 2}), 9.0);
    EXPECT_EQ(y.at({0, 0, 0}), 4.0);
    EXPECT_EQ(y.at({0, 0, 2}), 6.0);
}

TEST(Conv2d, StrideOutputShape) {
    TensorD x(Shape{1, 2, 8, 8}, 1.0);
    TensorD w(Shape{4, 2, 3, 3}, 1.0);
    Conv2dParams p;
    p.stride = {2, 2};
    p.padding = {1, 1};
    EXPECT_EQ(conv2d(x, w, TensorD(), p).shape(), (Shape{1, 4, 4, 4}));
}

TEST(Conv2d, ShapeMismatchNamesDimension) {
    TensorD x(Shape{1, 3, 4, 4});
    TensorD w(Shape{2, 2, 3, 3});
    try {
        conv2d(x, w, TensorD());
        FAIL();
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("channels"), std::string::npos);
    }
    TensorD w2(Shape{2, 3, 7, 7});
    try {
        conv2d(x, w2, TensorD());
        FAIL();
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("axis H"), std::string::npos);
    }
}

TEST(Conv3d, IdentityKernel) {
    std::mt19937_64 rng(2);
    TensorD x = test::random_tensor({2, 2, 3, 4, 4}, rng, -1, 1, false);
    TensorD w(Shape{2, 2, 1, 1, 1});
    w.at({0, 0, 0, 0, 0}) = 1;
    w.at({1, 1, 0, 0, 0}) = 1;
    TensorD y = conv3d(x, w, TensorD());
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Conv3d, TemporalCollapse) {
    const std::size_t n = 8;
    TensorD x(Shape{1, 3, n, 4, 4}, 1.0);
    TensorD w(Shape{5, 3, n, 1, 1}, 0.5);
    TensorD y = conv3d(x, w, TensorD());
    EXPECT_EQ(y.shape(), (Shape{1, 5, 1, 4, 4}));
    EXPECT_DOUBLE_EQ(y[0], 0.5 * 3 * n);
}

TEST(Maxpool, WindowExamples) {
    TensorD x(Shape{4}, std::vector<double>{1, 3, 2, 0});
    TensorD y = maxpool(x, 0, 2, 2);
    ASSERT_EQ(y.numel(), 2u);
    EXPECT_EQ(y[0], 3);
    EXPECT_EQ(y[1], 2);

    TensorD inc(Shape{6}, std::vector<double>{0, 1, 2, 3, 4, 5});
    TensorD z = maxpool(inc, 0, 3, 3);
    EXPECT_EQ(z[0], 2);
    EXPECT_EQ(z[1], 5);
    EXPECT_THROW(maxpool(x, 0, 5, 1), ShapeError);
}

TEST(Maxpool, GradientToFirstArgmax) {
    TensorD x(Shape{4}, std::vector<double>{2, 2, 1, 5}, true);
    sum(maxpool(x, 0, 2, 2)).backward();
    auto g = std::as_const(x).grad();
    EXPECT_EQ(g[0], 1);
    EXPECT_EQ(g[1], 0);
    EXPECT_EQ(g[2], 0);
    EXPECT_EQ(g[3], 1);
}

TEST(Matmul, IdentityAndHandCase) {
    TensorD a(Shape{2, 2}, std::vector<double>{1, 2, 3, 4});
    TensorD eye(Shape{2, 2}, std::vector<double>{1, 0, 0, 1});
    TensorD c = matmul(a, eye);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(c[i], a[i]);
    TensorD c2 = matmul(eye, a);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(c2[i], a[i]);
    EXPECT_THROW(matmul(a, TensorD(Shape{3, 2})), ShapeError);
}

TEST(Matmul, MatchesTripleLoopOracle) {
    std::mt19937_64 rng(3);
    TensorD a = test::random_tensor({5, 4}, rng, -1, 1, false);
    TensorD b = test::random_tensor({4, 3}, rng, -1, 1, false);
    TensorD c = matmul(a, b);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double acc = 0;
            for (std::size_t k = 0; k < 4; ++k) acc += a.at({i, k}) * b.at({k, j});
            EXPECT_NEAR(c.at({i, j}), acc, 1e-12);
        }
}

TEST(Activations, Values) {
    TensorD x(Shape{2}, std::vector<double>{-1, 2});
    TensorD r = relu(x);
    EXPECT_EQ(r[0], 0);
    EXPECT_EQ(r[1], 2);
    TensorD s = sigmoid(TensorD(Shape{1}, 0.0));
    EXPECT_EQ(s[0], 0.5);
    TensorD p = prelu(x, TensorD(Shape{1}, 0.25));
    EXPECT_EQ(p[0], -0.25);
    EXPECT_EQ(p[1], 2);
}

TEST(BatchNorm, ConstantInputNormalizesToBeta) {
    TensorD x(Shape{2, 3, 2, 2, 2}, 7.5);
    TensorD gamma(Shape{3}, 1.3), beta(Shape{3}, 0.0);
    BatchNormState<double> st{TensorD(Shape{3}, 0.0), TensorD(Shape{3}, 1.0)};
    TensorD y = batchnorm(x, gamma, beta, st, true);
    // (x - mean) = 0 exactly, so the output is beta regardless of eps
    for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_EQ(y[i], 0.0);
    // running statistics moved toward the batch statistics
    EXPECT_NEAR(st.running_mean[0], 0.75, 1e-12);
    EXPECT_NEAR(st.running_var[0], 0.9, 1e-12);
}

TEST(BatchNorm, EvalUsesRunningStats) {
    TensorD x(Shape{1, 1, 2}, std::vector<double>{1.0, 3.0});
    BatchNormState<double> st{TensorD(Shape{1}, 1.0), TensorD(Shape{1}, 4.0)};
    st.eps = 0;
    TensorD y = batchnorm(x, TensorD(Shape{1}, 2.0), TensorD(Shape{1}, 1.0), st, false);
    EXPECT_DOUBLE_EQ(y[0], 1.0);
    EXPECT_DOUBLE_EQ(y[1], 3.0);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
    TensorD p(Shape{3}, std::vector<double>{1, -2, 3}, true);
    AdamOptions o;
    o.weight_decay = 0;
    Adam<double> opt({p}, o);
    p.grad();  // allocate zeros
    opt.step();
    EXPECT_EQ(p[0], 1);
    EXPECT_EQ(p[1], -2);
    EXPECT_EQ(p[2], 3);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    TensorD p(Shape{1}, 0.5, true);
    AdamOptions o;
    o.weight_decay = 0;
    o.lr = 1e-4;
    Adam<double> opt({p}, o);
    p.grad()[0] = 1.0;
    opt.step();
    // hand-stepped oracle: m = 0.1, v = 0.001, mhat = 1, vhat = 1
    const double expected = 0.5 - 1e-4 * 1.0 / (1.0 + 1e-8);
    EXPECT_NEAR(p[0], expected, 1e-15);
}

TEST(Adam, LearningRateDecaysEvery2000Steps) {
    TensorD p(Shape{1}, 0.0, true);
    Adam<double> opt({p});
    EXPECT_DOUBLE_EQ(opt.current_lr(), 1e-4);
    for (int i = 0; i < 1999; ++i) opt.step();
    EXPECT_DOUBLE_EQ(opt.current_lr(), 1e-4);
    opt.step();
    EXPECT_DOUBLE_EQ(opt.current_lr(), 1e-4 * 0.999);
    opt.set_steps(4000);
    EXPECT_DOUBLE_EQ(opt.current_lr(), 1e-4 * 0.999 * 0.999);
}

TEST(Adam, WeightDecayActsAsL2) {
    TensorD p(Shape{1}, 2.0, true);
    AdamOptions o;
    o.weight_decay = 0.5;
    Adam<double> opt({p}, o);
    p.grad()[0] = 0.0;
    opt.step();
    // gradient becomes 0.5 * 2 = 1 > 0, so the first step is -lr
    EXPECT_NEAR(p[0], 2.0 - 1e-4 / (1.0 + 1e-8), 1e-14);
}

TEST(Determinism, RepeatedForwardIsBitwiseEqual) {
    std::mt19937_64 rng(9);
    TensorD x = test::random_tensor({2, 3, 4, 6, 6}, rng, -1, 1, false);
    TensorD w = test::random_tensor({4, 3, 3, 3, 3}, rng, -1, 1, false);
    Conv3dParams p;
    p.padding = {1, 1, 1};
    TensorD a = conv3d(x, w, TensorD(), p);
    TensorD b = conv3d(x, w, TensorD(), p);
    EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}
