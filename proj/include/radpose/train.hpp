#pragma once

// Training loop and batched inference over a Dataset.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "radpose/checkpoint.hpp"
#include "radpose/config.hpp"
#include "radpose/dataset.hpp"
#include "radpose/eval.hpp"
#include "radpose/model.hpp"
#include "radpose/optim.hpp"

namespace radpose {

struct LogEntry {
    std::size_t epoch = 0, step = 0;
    double loss = 0;
};

inline nlohmann::json to_json(const std::vector<LogEntry>& log) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : log) j.push_back({e.epoch, e.step, e.loss});
    return j;
}

// "epoch,step,loss" lines.
inline std::string log_csv(const std::vector<LogEntry>& log) {
    std::string out = "epoch,step,loss\n";
    char buf[96];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g\n", e.epoch, e.step, e.loss);
        out += buf;
    }
    return out;
}

// Batches come from a seeded shuffle of `windows`, reshuffled each epoch; a
// final short batch of an epoch is dropped unless it is the only one.
// Throws NumericalError when the loss or any intermediate is non-finite.
inline std::vector<LogEntry> train(PoseModel<float>& model, const Dataset& ds, std::vector<WindowRef> windows,
                                   const TrainOptions& opts,
                                   const std::function<void(const LogEntry&)>& on_step = {}) {
    opts.validate();
    if (windows.empty()) throw Error("train: no training windows");
    const ModelConfig& mc = model.config();
    if (ds.kind != mc.input)
        throw ShapeError(std::string("train: dataset holds ") + map_kind_name(ds.kind) + " maps, model expects " +
                         map_kind_name(mc.input));
    if (ds.frame_shape != Shape{2, mc.K, mc.H, mc.W})
        throw ShapeError("train: dataset frames " + shape_str(ds.frame_shape) + " do not match model input (2, " +
                         std::to_string(mc.K) + ", " + std::to_string(mc.H) + ", " + std::to_string(mc.W) + ")");
    AdamOptions ao;
    ao.lr = opts.lr;
    ao.weight_decay = opts.weight_decay;
    ao.decay_factor = opts.decay_factor;
    ao.decay_every = opts.decay_every;
    Adam<float> adam(model.parameters(), ao);
    std::mt19937_64 rng(opts.seed);
    const bool saved_flag = debug::check_finite();
    debug::check_finite() = opts.check_finite;
    model.set_training(true);
    const std::size_t bs = std::min(opts.batch, windows.size());
    const std::size_t per_epoch = windows.size() / bs;
    std::vector<LogEntry> log;
    try {
        std::size_t epoch = 0, pos = per_epoch;
        for (std::size_t step = 0; step < opts.steps; ++step) {
            if (pos == per_epoch) {
                std::shuffle(windows.begin(), windows.end(), rng);
                pos = 0;
                ++epoch;
            }
            const Batch b = make_batch(ds, std::span<const WindowRef>(windows).subspan(pos * bs, bs), mc.N,
                                       mc.heatmap_sigma);
            ++pos;
            const auto out = model.forward(b.xh, b.xv);
            Tensor<float> loss = model.loss(out, b.target, b.visible);
            const double lv = loss.item();
            if (!std::isfinite(lv)) throw NumericalError("train: loss is not finite at step " + std::to_string(step));
            adam.zero_grad();
            loss.backward();
            adam.step();
            log.push_back({epoch, step + 1, lv});
            if (on_step) on_step(log.back());
        }
    } catch (...) {
        debug::check_finite() = saved_flag;
        throw;
    }
    debug::check_finite() = saved_flag;
    model.set_training(false);
    return log;
}

struct Prediction {
    WindowRef window;
    ExtractedPose pose;
    Tensor<float> heatmaps;  // (C, H, W), kept only when requested
};

// Runs the model in inference mode and extracts keypoints from the refined
// heatmaps B (the coarse B-hat when the GCN is disabled).
inline std::vector<Prediction> predict(const PoseModel<float>& model, const Dataset& ds,
                                       const std::vector<WindowRef>& windows, std::size_t batch = 8,
                                       bool keep_heatmaps = false) {
    const ModelConfig& mc = model.config();
    if (ds.frame_shape != Shape{2, mc.K, mc.H, mc.W})
        throw ShapeError("predict: dataset frames " + shape_str(ds.frame_shape) + " do not match the model input");
    if (ds.kind != mc.input)
        throw ShapeError(std::string("predict: dataset holds ") + map_kind_name(ds.kind) + " maps, model expects " +
                         map_kind_name(mc.input));
    if (model.training()) throw Error("predict: model is in training mode");
    NoGradGuard ng;
    std::vector<Prediction> out;
    const std::size_t plane = kNumKeypoints * mc.H * mc.W;
    for (std::size_t i = 0; i < windows.size(); i += batch) {
        const std::size_t n = std::min(batch, windows.size() - i);
        const Batch b = make_batch(ds, std::span<const WindowRef>(windows).subspan(i, n), mc.N, mc.heatmap_sigma);
        const auto res = model.forward(b.xh, b.xv);
        const Tensor<float>& hm = res.heatmaps();
        for (std::size_t k = 0; k < n; ++k) {
            std::span<const float> one = std::span<const float>(hm.data()).subspan(k * plane, plane);
            Prediction p;
            p.window = windows[i + k];
            p.pose = extract_keypoints<float>(one, mc.H, mc.W);
            if (keep_heatmaps) p.heatmaps = Tensor<float>(Shape{kNumKeypoints, mc.H, mc.W}, std::vector<float>(one.begin(), one.end()));
            out.push_back(std::move(p));
        }
    }
    return out;
}

inline std::vector<PosePair> pose_pairs(const Dataset& ds, const std::vector<Prediction>& preds) {
    std::vector<PosePair> pairs;
    for (const auto& p : preds) {
        PosePair pp;
        pp.pred = p.pose.skeleton;
        pp.gt = ds.sequences.at(p.window.sequence).gt.at(p.window.frame);
        pp.confidence = p.pose.mean_confidence();
        pairs.push_back(pp);
    }
    return pairs;
}

// Windows of the given sequences, in order.
inline std::vector<WindowRef> windows_of(const Dataset& ds, std::size_t first, std::size_t last) {
    std::vector<WindowRef> w;
    for (std::size_t s = first; s < last && s < ds.sequences.size(); ++s)
        for (std::size_t f = 0; f < ds.sequences[s].gt.size(); ++f) w.push_back({s, f});
    return w;
}

}  // namespace radpose
