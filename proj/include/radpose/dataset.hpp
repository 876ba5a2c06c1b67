#pragma once

// Synthetic sequences, cached network inputs and sliding-window batches.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "radpose/config.hpp"
#include "radpose/io.hpp"
#include "radpose/preproc.hpp"
#include "radpose/radar.hpp"
#include "radpose/scenes.hpp"
#include "radpose/skeleton.hpp"

namespace radpose {

struct SequencePlan {
    std::size_t id = 0;
    std::string script;
    MotionParams params;
    std::uint64_t noise_seed = 0;
};

inline nlohmann::json to_json(const MotionParams& p) {
    return {{"fps", p.fps},         {"period", p.period}, {"amplitude", p.amplitude},
            {"lateral", p.lateral}, {"depth", p.depth},   {"base_amplitude", p.base_amplitude}};
}

// Script and motion of sequence `id`, drawn from its own generator so any
// subset of a dataset can be rebuilt independently.
inline SequencePlan plan_sequence(const DatasetConfig& cfg, std::size_t id, double fps = 10.0) {
    std::mt19937_64 rng(detail::splitmix64(cfg.seed * 0x9E3779B97F4A7C15ULL + id));
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * std::generate_canonical<double, 53>(rng); };
    SequencePlan p;
    p.id = id;
    p.script = cfg.scripts[id % cfg.scripts.size()];
    p.params.fps = fps;
    p.params.period = uniform(cfg.period_min, cfg.period_max);
    p.params.amplitude = uniform(cfg.amplitude_min, cfg.amplitude_max);
    p.params.lateral = uniform(-cfg.lateral_max, cfg.lateral_max);
    p.params.depth = uniform(cfg.depth_min, cfg.depth_max);
    p.noise_seed = rng();
    return p;
}

// Both sensors' cubes for one frame.
struct FramePair {
    AdcCube h, v;
};

inline NoiseOptions noise_for(const DatasetConfig& cfg, const SequencePlan& plan) {
    return {.snr_db = cfg.snr_db, .seed = plan.noise_seed};
}

// Simulates a planned sequence frame by frame; `sink(frame, cubes)` sees
// each pair once, in order.
inline SceneSequence simulate_sequence(const RadarConfig& radar, const DatasetConfig& cfg, const SequencePlan& plan,
                                       const std::function<void(std::size_t, const FramePair&)>& sink) {
    SceneSequence seq = skeleton_scene(plan.script, cfg.duration, plan.params);
    const NoiseOptions noise = noise_for(cfg, plan);
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
        const auto fi = static_cast<std::int64_t>(f);
        FramePair fp{synthesize_frame(radar, seq.frames[f], fi, SensorOrientation::kHorizontal, {}, noise),
                     synthesize_frame(radar, seq.frames[f], fi, SensorOrientation::kVertical, {}, noise)};
        sink(f, fp);
    }
    return seq;
}

// ---------------------------------------------------------------------------
// Network inputs

// Stem input for one frame: VRDAE and RAE maps averaged over elevation,
// RA maps unchanged, stored as f32 (2, K, H, W).  The stem averages over
// elevation first, so caching the average loses nothing.
inline std::vector<float> frame_input(const RadarMap& m) {
    const Tensor<double>& t = m.data;
    if (t.rank() == 4) return {t.data().begin(), t.data().end()};
    if (t.rank() != 5) throw ShapeError("frame_input: expected a rank-4 or rank-5 map, got " + shape_str(t.shape()));
    const std::size_t e = t.dim(4), n = t.numel() / e;
    std::vector<float> out(n);
    auto d = t.data();
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (std::size_t q = 0; q < e; ++q) s += d[i * e + q];
        out[i] = static_cast<float>(s / static_cast<double>(e));
    }
    return out;
}

struct SequenceInputs {
    std::vector<std::vector<float>> h, v;  // per frame, (2, K, H, W)
    std::vector<Skeleton2D> gt;
};

// A set of sequences sharing one per-frame input shape.
struct Dataset {
    MapKind kind = MapKind::kVRDAE;
    Shape frame_shape;  // (2, K, H, W)
    std::vector<SequenceInputs> sequences;

    std::size_t frames() const {
        std::size_t n = 0;
        for (const auto& s : sequences) n += s.gt.size();
        return n;
    }

    void add(SequenceInputs s, const Shape& shape) {
        if (sequences.empty()) frame_shape = shape;
        else if (shape != frame_shape)
            throw ShapeError("dataset: frame shape " + shape_str(shape) + " differs from " + shape_str(frame_shape));
        if (s.h.size() != s.gt.size() || s.v.size() != s.gt.size())
            throw Error("dataset: sequence has mismatched map and ground-truth counts");
        sequences.push_back(std::move(s));
    }
};

inline Shape frame_input_shape(const RadarMap& m) {
    const Shape& s = m.data.shape();
    return {s[0], s[1], s[2], s[3]};
}

// Reads one preprocessed sequence directory (frame_<n>_h.rmap,
// frame_<n>_v.rmap, gt.json).
inline SequenceInputs load_sequence_inputs(const std::filesystem::path& dir, Shape* shape = nullptr,
                                           MapKind* kind = nullptr) {
    SequenceInputs s;
    s.gt = read_gt(dir / "gt.json").ground_truth;
    for (std::size_t f = 0; f < s.gt.size(); ++f) {
        const RadarMap mh = read_map(dir / frame_file_name(f, SensorOrientation::kHorizontal, ".rmap"));
        const RadarMap mv = read_map(dir / frame_file_name(f, SensorOrientation::kVertical, ".rmap"));
        if (mh.data.shape() != mv.data.shape() || mh.kind != mv.kind)
            throw FormatError((dir / frame_file_name(f, SensorOrientation::kVertical, ".rmap")).string() +
                              ": map differs from its horizontal pair");
        if (mh.kind == MapKind::kHeatmap)
            throw FormatError((dir / frame_file_name(f, SensorOrientation::kHorizontal, ".rmap")).string() +
                              ": heatmap dumps are not network inputs");
        if (shape) *shape = frame_input_shape(mh);
        if (kind) *kind = mh.kind;
        s.h.push_back(frame_input(mh));
        s.v.push_back(frame_input(mv));
    }
    if (s.gt.empty()) throw FormatError(dir.string() + ": sequence has no frames");
    return s;
}

// Every seq_* directory below `root`, in numeric order.
inline std::vector<std::filesystem::path> sequence_dirs(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root)) throw IoError(root.string() + ": not a directory");
    std::vector<std::pair<std::size_t, std::filesystem::path>> found;
    for (const auto& e : std::filesystem::directory_iterator(root)) {
        const std::string name = e.path().filename().string();
        if (!e.is_directory() || name.rfind("seq_", 0) != 0) continue;
        try {
            found.emplace_back(std::stoul(name.substr(4)), e.path());
        } catch (const std::exception&) {
        }
    }
    std::sort(found.begin(), found.end());
    std::vector<std::filesystem::path> out;
    for (auto& f : found) out.push_back(f.second);
    if (out.empty()) throw IoError(root.string() + ": no seq_<id> directories");
    return out;
}

inline Dataset load_dataset(const std::filesystem::path& root) {
    Dataset ds;
    for (const auto& dir : sequence_dirs(root)) {
        Shape shape;
        MapKind kind{};
        SequenceInputs s = load_sequence_inputs(dir, &shape, &kind);
        if (!ds.sequences.empty() && kind != ds.kind)
            throw FormatError(dir.string() + ": map kind differs from earlier sequences");
        ds.kind = kind;
        ds.add(std::move(s), shape);
    }
    return ds;
}

// One network-input flavour: map kind and K.
struct InputSpec {
    MapKind kind = MapKind::kVRDAE;
    std::size_t K = 8;
};

// All requested maps of one cube.  VRDAE maps of any K share one 4D
// transform and RAE maps share one range/angle transform.
inline std::vector<RadarMap> make_maps(const AdcCube& cube, const PreprocConfig& pre,
                                       const std::vector<InputSpec>& specs) {
    auto has = [&](MapKind k) {
        return std::any_of(specs.begin(), specs.end(), [&](const InputSpec& s) { return s.kind == k; });
    };
    for (const auto& sp : specs) {
        if (sp.kind == MapKind::kHeatmap) throw Error("make_maps: heatmap is not a radar map kind");
        PreprocConfig p = pre;
        p.K = sp.K;
        p.validate(cube.data.shape());
    }
    ComplexTensor rdae, rae;
    if (has(MapKind::kVRDAE)) rdae = make_rdae(cube, pre);
    if (has(MapKind::kRAE)) rae = make_rae_intermediate(cube, pre);
    std::vector<RadarMap> out;
    for (const auto& sp : specs) {
        PreprocConfig p = pre;
        p.K = sp.K;
        switch (sp.kind) {
            case MapKind::kVRDAE: out.push_back(vrdae_from_rdae(rdae, sp.K, cube.frame_index)); break;
            case MapKind::kRAE: out.push_back(rae_from_intermediate(rae, sp.K, cube.frame_index)); break;
            default: out.push_back(make_map(sp.kind, cube, p)); break;
        }
    }
    return out;
}

// Accumulates per-frame inputs of several specs for one sequence.
struct SequenceBuilder {
    std::vector<SequenceInputs> seqs;
    std::vector<Shape> shapes;

    explicit SequenceBuilder(std::size_t n) : seqs(n), shapes(n) {}

    void add(const AdcCube& h, const AdcCube& v, const PreprocConfig& pre, const std::vector<InputSpec>& specs) {
        const auto mh = make_maps(h, pre, specs), mv = make_maps(v, pre, specs);
        for (std::size_t i = 0; i < specs.size(); ++i) {
            shapes[i] = frame_input_shape(mh[i]);
            seqs[i].h.push_back(frame_input(mh[i]));
            seqs[i].v.push_back(frame_input(mv[i]));
        }
    }

    void finish(std::vector<Dataset>& out, const std::vector<Skeleton2D>& gt) {
        for (std::size_t i = 0; i < seqs.size(); ++i) {
            seqs[i].gt = gt;
            out[i].add(std::move(seqs[i]), shapes[i]);
        }
    }
};

inline std::vector<Dataset> empty_datasets(const std::vector<InputSpec>& specs) {
    std::vector<Dataset> out(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) out[i].kind = specs[i].kind;
    return out;
}

// Simulates every sequence of `cfg` once and turns each frame into all the
// requested inputs.
inline std::vector<Dataset> build_datasets(const RadarConfig& radar, const PreprocConfig& pre, const DatasetConfig& cfg,
                                           const std::vector<InputSpec>& specs,
                                           const std::function<void(std::size_t)>& on_sequence = {}) {
    cfg.validate();
    std::vector<Dataset> out = empty_datasets(specs);
    for (std::size_t id = 0; id < cfg.sequences; ++id) {
        const SequencePlan plan = plan_sequence(cfg, id, radar.fps);
        SequenceBuilder b(specs.size());
        const SceneSequence seq = simulate_sequence(
            radar, cfg, plan, [&](std::size_t, const FramePair& fp) { b.add(fp.h, fp.v, pre, specs); });
        b.finish(out, seq.ground_truth);
        if (on_sequence) on_sequence(id);
    }
    return out;
}

// Same as build_datasets for simulated sequences already on disk.
inline std::vector<Dataset> load_cube_datasets(const std::filesystem::path& root, const PreprocConfig& pre,
                                               const std::vector<InputSpec>& specs,
                                               const std::function<void(std::size_t)>& on_sequence = {}) {
    std::vector<Dataset> out = empty_datasets(specs);
    std::size_t i = 0;
    for (const auto& dir : sequence_dirs(root)) {
        const auto gt = read_gt(dir / "gt.json").ground_truth;
        SequenceBuilder b(specs.size());
        for (std::size_t f = 0; f < gt.size(); ++f)
            b.add(read_cube(dir / frame_file_name(f, SensorOrientation::kHorizontal)),
                  read_cube(dir / frame_file_name(f, SensorOrientation::kVertical)), pre, specs);
        b.finish(out, gt);
        if (on_sequence) on_sequence(i);
        ++i;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Windows and batches

struct WindowRef {
    std::size_t sequence = 0;
    std::size_t frame = 0;  // target frame, window position N/2
};

inline std::vector<WindowRef> all_windows(const Dataset& ds) {
    std::vector<WindowRef> w;
    for (std::size_t s = 0; s < ds.sequences.size(); ++s)
        for (std::size_t f = 0; f < ds.sequences[s].gt.size(); ++f) w.push_back({s, f});
    return w;
}

// Frame indices of the window around `target`: target - N/2 .. target + N/2 - 1,
// clamped to the sequence so every frame has a full window.
inline std::vector<std::size_t> window_frames(std::size_t target, std::size_t n, std::size_t length) {
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto f = static_cast<std::int64_t>(target) + static_cast<std::int64_t>(i) - static_cast<std::int64_t>(n / 2);
        out[i] = static_cast<std::size_t>(std::clamp<std::int64_t>(f, 0, static_cast<std::int64_t>(length) - 1));
    }
    return out;
}

struct Batch {
    Tensor<float> xh, xv;    // (B, N, 2, K, H, W)
    Tensor<float> target;    // (B, C, H, W)
    std::vector<float> visible;  // B * C
    std::vector<Skeleton2D> gt;
};

// Stacks windows into a batch.  Each window is scaled per sensor by its
// largest magnitude so inputs sit in [-1, 1].
inline Batch make_batch(const Dataset& ds, std::span<const WindowRef> refs, std::size_t n, double sigma) {
    if (ds.sequences.empty()) throw Error("make_batch: empty dataset");
    const Shape& fs = ds.frame_shape;
    const std::size_t B = refs.size(), per = numel_of(fs), H = fs[2], W = fs[3];
    Batch b;
    b.xh = Tensor<float>(Shape{B, n, fs[0], fs[1], H, W});
    b.xv = Tensor<float>(Shape{B, n, fs[0], fs[1], H, W});
    b.target = Tensor<float>(Shape{B, kNumKeypoints, H, W});
    b.visible.assign(B * kNumKeypoints, 0.f);
    for (std::size_t i = 0; i < B; ++i) {
        const auto& seq = ds.sequences.at(refs[i].sequence);
        const auto frames = window_frames(refs[i].frame, n, seq.gt.size());
        auto fill = [&](const std::vector<std::vector<float>>& src, Tensor<float>& dst) {
            float peak = 0;
            for (std::size_t f : frames)
                for (float v : src[f]) peak = std::max(peak, std::abs(v));
            const float inv = peak > 0 ? 1.0f / peak : 1.0f;
            float* out = dst.data().data() + i * n * per;
            for (std::size_t t = 0; t < n; ++t)
                for (std::size_t k = 0; k < per; ++k) out[t * per + k] = src[frames[t]][k] * inv;
        };
        fill(seq.h, b.xh);
        fill(seq.v, b.xv);
        const Skeleton2D& gt = seq.gt.at(refs[i].frame);
        const auto hm = gt_heatmaps<float>(gt, H, W, sigma);
        std::copy(hm.data().begin(), hm.data().end(), b.target.data().begin() + i * kNumKeypoints * H * W);
        for (std::size_t c = 0; c < kNumKeypoints; ++c) b.visible[i * kNumKeypoints + c] = gt.visible[c] ? 1.f : 0.f;
        b.gt.push_back(gt);
    }
    return b;
}

}  // namespace radpose
