#pragma once

// Central finite-difference gradient checking for test code.  Independent of
// the backward closures it verifies: it only calls forward passes.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "radpose/ops.hpp"
#include "radpose/tensor.hpp"

namespace radpose::test {

using TensorD = Tensor<double>;

// Tolerance the tests apply to coordinate probes; sets the absolute floor.
inline constexpr double kCoordTol = 1e-4;

struct GradCheckResult {
    double directional_rel_err = 0;
    double coord_rel_err = 0;
    double worst() const { return std::max(directional_rel_err, coord_rel_err); }
};

inline double rel_err(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Checks d/dvars of sum(f() * R) for a fixed random R: once along a random
// direction through all variables, then on `n_coords` random single entries.
template <class F>
GradCheckResult check_gradients(std::vector<TensorD> vars, F&& f, std::mt19937_64& rng, std::size_t n_coords = 6,
                                double h = 1e-5) {
    std::normal_distribution<double> normal;
    TensorD out = f();
    TensorD weights(out.shape());
    for (auto& v : weights.data()) v = normal(rng);
    auto objective = [&]() {
        NoGradGuard guard;
        TensorD y = f();
        double acc = 0;
        for (std::size_t i = 0; i < y.numel(); ++i) acc += y[i] * weights[i];
        return acc;
    };

    for (auto& v : vars) v.zero_grad();
    sum(mul(out, weights)).backward();
    std::vector<std::vector<double>> analytic;
    for (auto& v : vars) {
        std::span<const double> g = std::as_const(v).grad();
        analytic.emplace_back(g.begin(), g.end());
        if (analytic.back().empty()) analytic.back().assign(v.numel(), 0.0);
    }

    GradCheckResult res;
    {
        std::vector<std::vector<double>> dir;
        double a = 0;
        for (std::size_t k = 0; k < vars.size(); ++k) {
            dir.emplace_back(vars[k].numel());
            for (std::size_t i = 0; i < vars[k].numel(); ++i) {
                dir[k][i] = normal(rng);
                a += dir[k][i] * analytic[k][i];
            }
        }
        auto shift = [&](double s) {
            for (std::size_t k = 0; k < vars.size(); ++k)
                for (std::size_t i = 0; i < vars[k].numel(); ++i) vars[k][i] += s * dir[k][i];
        };
        shift(h);
        const double fp = objective();
        shift(-2 * h);
        const double fm = objective();
        shift(h);
        res.directional_rel_err = rel_err(a, (fp - fm) / (2 * h));
    }
    // Single-entry probes use a longer step: an entry rarely sits on a kink,
    // while roundoff dominates the quotient when its gradient is small.
    const double hc = std::max(h, 1e-6);
    const double f0 = objective();
    // Gradients below about ten roundoff quanta of the quotient are compared
    // absolutely rather than relatively.
    const double floor = std::max(1e-5, 10 * std::numeric_limits<double>::epsilon() * std::abs(f0) / hc / kCoordTol);
    std::size_t probes = 0;
    for (std::size_t c = 0; c < n_coords && probes < 10 * n_coords; ++probes) {
        std::uniform_int_distribution<std::size_t> pick_var(0, vars.size() - 1);
        const std::size_t k = pick_var(rng);
        std::uniform_int_distribution<std::size_t> pick(0, vars[k].numel() - 1);
        const std::size_t i = pick(rng);
        const double x0 = vars[k][i];
        vars[k][i] = x0 + hc;
        const double fp = objective();
        vars[k][i] = x0 - hc;
        const double fm = objective();
        vars[k][i] = x0;
        // One-sided slopes that disagree mean the probe straddles a relu or
        // max-pool switch, where no finite difference is meaningful.
        const double up = (fp - f0) / hc, down = (f0 - fm) / hc;
        if (std::abs(up - down) > 1e-3 * std::max({std::abs(up), std::abs(down), 1e-3})) continue;
        res.coord_rel_err = std::max(res.coord_rel_err, rel_err(analytic[k][i], (fp - fm) / (2 * hc), floor));
        ++c;
    }
    return res;
}

template <class Rng>
TensorD random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = true) {
    return TensorD::uniform(std::move(shape), lo, hi, rng, requires_grad);
}

}  // namespace radpose::test
