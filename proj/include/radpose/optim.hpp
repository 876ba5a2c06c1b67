#pragma once

#include <cmath>
#include <vector>

#include "radpose/tensor.hpp"

namespace radpose {

struct AdamOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;  // L2 term added to the gradient
    double decay_factor = 0.999;
    std::size_t decay_every = 2000;
};

// Adam with L2 weight decay folded into the gradient and a step-wise
// learning-rate decay: lr * decay_factor^floor(steps / decay_every).
template <class T>
class Adam {
   public:
    Adam(std::vector<Tensor<T>> params, AdamOptions opts = {}) : params_(std::move(params)), opts_(opts) {
        for (const auto& p : params_) {
            m_.emplace_back(p.numel(), 0.0);
            v_.emplace_back(p.numel(), 0.0);
        }
    }

    double current_lr() const {
        const auto k = static_cast<double>(steps_ / opts_.decay_every);
        return opts_.lr * std::pow(opts_.decay_factor, k);
    }

    std::size_t steps() const { return steps_; }
    void set_steps(std::size_t s) { steps_ = s; }
    const AdamOptions& options() const { return opts_; }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    // Parameters without a gradient are treated as having a zero gradient.
    void step() {
        const double lr = current_lr();
        ++steps_;
        const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(steps_));
        const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(steps_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto& p = params_[k];
            auto data = p.data();
            std::span<const T> grad = std::as_const(p).grad();
            auto& m = m_[k];
            auto& v = v_[k];
            for (std::size_t i = 0; i < data.size(); ++i) {
                double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
                g += opts_.weight_decay * static_cast<double>(data[i]);
                m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g;
                v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g * g;
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                data[i] = static_cast<T>(static_cast<double>(data[i]) - lr * mhat / (std::sqrt(vhat) + opts_.eps));
            }
        }
    }

   private:
    std::vector<Tensor<T>> params_;
    AdamOptions opts_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t steps_ = 0;
};

}  // namespace radpose
