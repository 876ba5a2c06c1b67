#pragma once

// The two-branch pose network: per-radar stem, 3D multi-scale encoder,
// cross/self attention fusion, heatmap decoder and skeleton GCN refinement.

#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "radpose/ops.hpp"
#include "radpose/preproc.hpp"
#include "radpose/skeleton.hpp"

namespace radpose {

// Which attention outputs feed the decoder.
enum class Fusion { kNone, kCross, kSelf, kCrossSelf };

inline const char* fusion_name(Fusion f) {
    switch (f) {
        case Fusion::kNone: return "none";
        case Fusion::kCross: return "cross";
        case Fusion::kSelf: return "self";
        case Fusion::kCrossSelf: return "cross_self";
    }
    return "?";
}

inline Fusion parse_fusion(std::string_view s) {
    if (s == "none") return Fusion::kNone;
    if (s == "cross") return Fusion::kCross;
    if (s == "self") return Fusion::kSelf;
    if (s == "cross_self") return Fusion::kCrossSelf;
    throw Error("unknown fusion '" + std::string(s) + "' (expected none, cross, self or cross_self)");
}

struct ModelConfig {
    std::size_t N = 8;   // frames per window
    std::size_t K = 8;   // velocity (or sampled chirp) bins
    std::size_t D = 32;  // stem channels
    std::size_t S = 3;   // encoder scales
    std::size_t C = kNumKeypoints;
    std::size_t H = 64;  // range bins = heatmap rows
    std::size_t W = 64;  // azimuth bins = heatmap cols
    double alpha = 1.0;
    Fusion fusion = Fusion::kCrossSelf;
    bool use_gcn = true;
    MapKind input = MapKind::kVRDAE;
    double heatmap_sigma = 2.0;  // GT Gaussian width in heatmap cells
    std::optional<double> head_bias;  // constant heatmap-logit bias at init; unset = default conv init
    std::uint64_t seed = 0;

    void validate() const {
        if (N == 0 || K == 0 || D == 0 || S == 0 || H == 0 || W == 0) throw Error("ModelConfig: sizes must be positive");
        if (N % (std::size_t{1} << (S - 1)) != 0)
            throw Error("ModelConfig: N = " + std::to_string(N) + " is not divisible by 2^(S-1) = " +
                        std::to_string(std::size_t{1} << (S - 1)));
        if (K % 2 != 0) throw Error("ModelConfig: K must be even");
        if ((H * W) % 4 != 0) throw Error("ModelConfig: H * W must be divisible by 4");
        if (H % (std::size_t{1} << (S - 1)) != 0 || W % (std::size_t{1} << (S - 1)) != 0)
            throw Error("ModelConfig: H and W must be divisible by 2^(S-1)");
        if (use_gcn && (H % 2 != 0 || W % 2 != 0)) throw Error("ModelConfig: GCN needs even H and W");
        if (C != kNumKeypoints) throw Error("ModelConfig: C is fixed at 14");
        if (!(alpha >= 0)) throw Error("ModelConfig: alpha must be non-negative");
        if (head_bias && !std::isfinite(*head_bias)) throw Error("ModelConfig: head_bias must be finite");
    }

    // Channel width of encoder scale i (1-based).
    std::size_t scale_channels(std::size_t i) const { return (std::size_t{1} << i) * D; }

    std::size_t fused_channels(std::size_t i) const {
        const std::size_t ch = scale_channels(i);
        return fusion == Fusion::kSelf || fusion == Fusion::kCrossSelf ? 4 * ch : 2 * ch;
    }
};

inline nlohmann::json to_json(const ModelConfig& c) {
    return {{"N", c.N},         {"K", c.K},
            {"D", c.D},         {"S", c.S},
            {"C", c.C},         {"H", c.H},
            {"W", c.W},         {"alpha", c.alpha},
            {"fusion", fusion_name(c.fusion)},
            {"use_gcn", c.use_gcn},
            {"input", map_kind_name(c.input)},
            {"heatmap_sigma", c.heatmap_sigma},
            {"head_bias", c.head_bias ? nlohmann::json(*c.head_bias) : nlohmann::json(nullptr)},
            {"seed", c.seed}};
}

// Rejects unknown keys; missing keys keep their defaults.
inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    if (!j.is_object()) throw Error("model config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "N") c.N = v.get<std::size_t>();
            else if (key == "K") c.K = v.get<std::size_t>();
            else if (key == "D") c.D = v.get<std::size_t>();
            else if (key == "S") c.S = v.get<std::size_t>();
            else if (key == "C") c.C = v.get<std::size_t>();
            else if (key == "H") c.H = v.get<std::size_t>();
            else if (key == "W") c.W = v.get<std::size_t>();
            else if (key == "alpha") c.alpha = v.get<double>();
            else if (key == "fusion") c.fusion = parse_fusion(v.get<std::string>());
            else if (key == "use_gcn") c.use_gcn = v.get<bool>();
            else if (key == "input") c.input = parse_map_kind(v.get<std::string>());
            else if (key == "heatmap_sigma") c.heatmap_sigma = v.get<double>();
            else if (key == "head_bias") c.head_bias = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else throw Error("model config: unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------

template <class T>
struct NamedTensor {
    std::string name;
    Tensor<T> tensor;
    bool trainable = true;
};

template <class T>
struct Conv {
    Tensor<T> w, b;  // b undefined when bias-free
};

template <class T>
struct BatchNorm {
    Tensor<T> gamma, beta;
    BatchNormState<T> state;
};

template <class T>
struct Block3d {
    Conv<T> conv1, conv2, proj;  // proj undefined for identity shortcut
    BatchNorm<T> bn1, bn2, bn_proj;
    std::size_t stride = 1;
};

template <class T>
struct Block2d {
    Conv<T> conv1, conv2, proj;
    Tensor<T> slope1, slope2;
};

template <class T>
struct Attention {
    Conv<T> q_h, k_h, v_h, q_v, k_v, v_v;
    Conv<T> out_cross_h, out_cross_v, out_self_h, out_self_v;
};

template <class T>
struct ModelOutput {
    Tensor<T> coarse;    // B-hat: sigmoid of the decoder logits, (B, C, H, W)
    Tensor<T> logits;    // f-bar, (B, C, H, W)
    Tensor<T> refined;   // B: GCN output, (B, C, H, W); undefined without the GCN
    const Tensor<T>& heatmaps() const { return refined.defined() ? refined : coarse; }
};

template <class T>
class PoseModel {
   public:
    explicit PoseModel(ModelConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
        cfg_.validate();
        build();
    }

    const ModelConfig& config() const { return cfg_; }

    std::vector<NamedTensor<T>>& tensors() { return tensors_; }
    const std::vector<NamedTensor<T>>& tensors() const { return tensors_; }

    std::vector<Tensor<T>> parameters() const {
        std::vector<Tensor<T>> out;
        for (const auto& t : tensors_)
            if (t.trainable) out.push_back(t.tensor);
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& t : tensors_)
            if (t.trainable) n += t.tensor.numel();
        return n;
    }

    const Tensor<T>& tensor(const std::string& name) const {
        for (const auto& t : tensors_)
            if (t.name == name) return t.tensor;
        throw Error("no tensor named '" + name + "'");
    }

    void set_training(bool on) { training_ = on; }
    bool training() const { return training_; }

    // ---- stem: (B, N, 2, K, H, W[, E]) -> (B, D, N, H, W)
    Tensor<T> stem(const Tensor<T>& x, std::size_t branch) const {
        Tensor<T> in = x;
        if (in.rank() == 7) in = mean_axis(in, 6);
        if (in.rank() != 6 || in.dim(1) != cfg_.N || in.dim(2) != 2 || in.dim(3) != cfg_.K || in.dim(4) != cfg_.H ||
            in.dim(5) != cfg_.W)
            throw ShapeError("stem: expected (B, " + std::to_string(cfg_.N) + ", 2, " + std::to_string(cfg_.K) + ", " +
                             std::to_string(cfg_.H) + ", " + std::to_string(cfg_.W) + "[, E]) input, got " +
                             shape_str(x.shape()));
        const std::size_t B = in.dim(0), N = cfg_.N, K = cfg_.K, half = K / 2;
        Tensor<T> f = reshape(in, Shape{B * N, 2, K, cfg_.H, cfg_.W});
        // Same-length convolution along velocity: K/2 - 1 zeros in total, the
        // smaller half in front.
        const std::size_t total = half - 1;
        if (total > 0) f = pad(f, 2, total / 2, total - total / 2);
        const auto& s = stem_[branch];
        f = relu(conv3d(f, s[0].w, s[0].b));
        f = maxpool(f, 2, half, half);
        f = relu(conv3d(f, s[1].w, s[1].b));  // collapses the remaining length-2 axis
        f = reshape(f, Shape{B, N, cfg_.D, cfg_.H, cfg_.W});
        return permute(f, {0, 2, 1, 3, 4});
    }

    // ---- one encoder scale: conv blocks + temporal collapse.
    // Returns {block output (B, Ch, T', h, w), collapsed feature (B, Ch, h, w)}.
    std::pair<Tensor<T>, Tensor<T>> encode_scale(const Tensor<T>& x, std::size_t branch, std::size_t i) const {
        const auto& blocks = enc_[branch][i - 1];
        Tensor<T> y = block3d(x, blocks[0]);
        y = block3d(y, blocks[1]);
        const Conv<T>& tc = collapse_[branch][i - 1];
        Tensor<T> f = conv3d(y, tc.w, tc.b);
        if (f.dim(2) != 1) throw ShapeError("encoder: temporal collapse left length " + std::to_string(f.dim(2)));
        f = reshape(f, Shape{f.dim(0), f.dim(1), f.dim(3), f.dim(4)});
        return {y, f};
    }

    std::vector<Tensor<T>> encode(const Tensor<T>& stem_out, std::size_t branch) const {
        std::vector<Tensor<T>> feats;
        Tensor<T> x = stem_out;
        for (std::size_t i = 1; i <= cfg_.S; ++i) {
            auto [y, f] = encode_scale(x, branch, i);
            feats.push_back(f);
            x = y;
        }
        return feats;
    }

    // ---- cross/self attention fusion at scale i: two (B, Ch, h, w) -> (B, Ch', h, w)
    Tensor<T> fuse(const Tensor<T>& fh, const Tensor<T>& fv, std::size_t i) const {
        if (fh.shape() != fv.shape()) throw ShapeError("fusion: branch shapes differ");
        if (cfg_.fusion == Fusion::kNone) return concat<T>({fh, fv}, 1);
        const Attention<T>& a = att_[i - 1];
        const std::size_t B = fh.dim(0), ch = fh.dim(1), h = fh.dim(2), w = fh.dim(3), c2 = ch / 2;
        auto proj = [&](const Tensor<T>& x, const Conv<T>& c) {
            return reshape(conv2d(x, c.w, c.b), Shape{B, c2, h * w});
        };
        auto back = [&](const Tensor<T>& x, const Conv<T>& c) {
            return conv2d(reshape(x, Shape{B, c2, h, w}), c.w, c.b);
        };
        const Tensor<T> qh = proj(fh, a.q_h), kh = proj(fh, a.k_h), vh = proj(fh, a.v_h);
        const Tensor<T> qv = proj(fv, a.q_v), kv = proj(fv, a.k_v), vv = proj(fv, a.v_v);
        std::vector<Tensor<T>> parts;
        if (cfg_.fusion == Fusion::kCross || cfg_.fusion == Fusion::kCrossSelf) {
            parts.push_back(add(fh, back(attend(qv, kh, vh), a.out_cross_h)));
            parts.push_back(add(fv, back(attend(qh, kv, vv), a.out_cross_v)));
        } else {
            parts.push_back(fh);
            parts.push_back(fv);
        }
        if (cfg_.fusion == Fusion::kSelf || cfg_.fusion == Fusion::kCrossSelf) {
            parts.push_back(back(attend(qh, kh, vh), a.out_self_h));
            parts.push_back(back(attend(qv, kv, vv), a.out_self_v));
        }
        return concat<T>(parts, 1);
    }

    // Row-softmax attention: q, k, v are (B, c, P); returns (B, c, P) with
    // out[:, :, p] = sum_j A[p, j] v[:, :, j].
    static Tensor<T> attend(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v) {
        return bmm(v, attention_map(q, k), false, true);
    }

    static Tensor<T> attention_map(const Tensor<T>& q, const Tensor<T>& k) {
        const T s = T(1) / std::sqrt(static_cast<T>(q.dim(1)));
        return softmax(scale(bmm(q, k, true, false), s));
    }

    // ---- decoder: fused features, finest first -> logits (B, C, H, W)
    Tensor<T> decode(const std::vector<Tensor<T>>& fused) const {
        if (fused.size() != cfg_.S) throw ShapeError("decoder: expected one feature map per scale");
        Tensor<T> x = block2d(fused[cfg_.S - 1], dec_[cfg_.S - 1]);
        for (std::size_t i = cfg_.S - 1; i >= 1; --i) {
            x = concat<T>({upsample2(x), fused[i - 1]}, 1);
            x = block2d(x, dec_[i - 1]);
        }
        return conv2d(x, head_.w, head_.b);
    }

    // ---- skeleton GCN: logits (B, C, H, W) -> refined heatmaps (B, C, H, W)
    Tensor<T> refine(const Tensor<T>& logits) const {
        return gcn(logits, adjacency().template a_hat<T>(), gcn_w_);
    }

    // Three-layer propagation relu(A V W1) -> relu(A V W2) -> sigmoid(A V W3)
    // on the 2x-downscaled, flattened keypoint planes.  Exposed with explicit
    // adjacency and weights for structural tests.
    static Tensor<T> gcn(const Tensor<T>& logits, const std::vector<T>& a_hat, const std::array<Tensor<T>, 3>& w) {
        if (logits.rank() != 4) throw ShapeError("gcn: expected (B, C, H, W) input");
        const std::size_t B = logits.dim(0), C = logits.dim(1), h = logits.dim(2) / 2, ww = logits.dim(3) / 2;
        const std::size_t P = h * ww;
        if (a_hat.size() != C * C) throw ShapeError("gcn: adjacency must be C x C");
        for (std::size_t i = 0; i < C; ++i)
            for (std::size_t j = 0; j < i; ++j)
                if (a_hat[i * C + j] != a_hat[j * C + i]) throw Error("gcn: adjacency is not symmetric");
        Tensor<T> v = reshape(avgpool2(logits), Shape{B, C, P});
        for (std::size_t l = 0; l < 3; ++l) {
            if (w[l].rank() != 2 || w[l].dim(0) != P || w[l].dim(1) != P)
                throw ShapeError("gcn: weight " + std::to_string(l) + " must be " + std::to_string(P) + " x " +
                                 std::to_string(P));
            Tensor<T> m = graph_mix<T>(a_hat, C, v);
            m = reshape(rowwise_matmul(reshape(m, Shape{B * C, P}), w[l]), Shape{B, C, P});
            v = l < 2 ? relu(m) : sigmoid(m);
        }
        return upsample2(reshape(v, Shape{B, C, h, ww}));
    }

    ModelOutput<T> forward(const Tensor<T>& xh, const Tensor<T>& xv) const {
        if (xh.shape() != xv.shape()) throw ShapeError("forward: horizontal and vertical inputs differ in shape");
        const auto fh = encode(stem(xh, 0), 0);
        const auto fv = encode(stem(xv, 1), 1);
        std::vector<Tensor<T>> fused;
        for (std::size_t i = 1; i <= cfg_.S; ++i) fused.push_back(fuse(fh[i - 1], fv[i - 1], i));
        ModelOutput<T> out;
        out.logits = decode(fused);
        out.coarse = sigmoid(out.logits);
        if (cfg_.use_gcn) out.refined = refine(out.logits);
        return out;
    }

    // Summed BCE of both heads against targets (B, C, H, W), averaged over the
    // batch.  `visible` (B * C entries, 0 or 1) masks keypoint planes.
    Tensor<T> loss(const ModelOutput<T>& out, const Tensor<T>& target, std::span<const T> visible = {}) const {
        return two_term_loss(out.coarse, out.refined, target, static_cast<T>(cfg_.alpha), visible);
    }

    static Tensor<T> two_term_loss(const Tensor<T>& coarse, const Tensor<T>& refined, const Tensor<T>& target, T alpha,
                                   std::span<const T> visible = {}) {
        Tensor<T> l = bce_sum(coarse, target, visible);
        if (refined.defined()) l = add(l, scale(bce_sum(refined, target, visible), alpha));
        const T inv_b = target.rank() == 4 ? T(1) / static_cast<T>(target.dim(0)) : T(1);
        return scale(l, inv_b);
    }

    const std::array<Tensor<T>, 3>& gcn_weights() const { return gcn_w_; }

   private:
    // ---- construction

    Tensor<T> add_tensor(const std::string& name, Shape shape, double bound, bool trainable = true) {
        Tensor<T> t = bound > 0 ? Tensor<T>::uniform(std::move(shape), T(-bound), T(bound), rng_, trainable)
                                : Tensor<T>(std::move(shape), T(0), trainable);
        tensors_.push_back({name, t, trainable});
        return t;
    }

    Tensor<T> add_const(const std::string& name, Shape shape, T value, bool trainable) {
        Tensor<T> t(std::move(shape), value, trainable);
        tensors_.push_back({name, t, trainable});
        return t;
    }

    Conv<T> make_conv(const std::string& name, Shape wshape, bool bias = true) {
        std::size_t fan_in = 1;
        for (std::size_t i = 1; i < wshape.size(); ++i) fan_in *= wshape[i];
        const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
        Conv<T> c;
        const std::size_t co = wshape[0];
        c.w = add_tensor(name + ".weight", std::move(wshape), bound);
        if (bias) c.b = add_tensor(name + ".bias", Shape{co}, 1.0 / std::sqrt(static_cast<double>(fan_in)));
        return c;
    }

    BatchNorm<T> make_bn(const std::string& name, std::size_t c) {
        BatchNorm<T> bn;
        bn.gamma = add_const(name + ".gamma", Shape{c}, T(1), true);
        bn.beta = add_const(name + ".beta", Shape{c}, T(0), true);
        bn.state.running_mean = add_const(name + ".running_mean", Shape{c}, T(0), false);
        bn.state.running_var = add_const(name + ".running_var", Shape{c}, T(1), false);
        return bn;
    }

    Block3d<T> make_block3d(const std::string& name, std::size_t ci, std::size_t co, std::size_t stride) {
        Block3d<T> b;
        b.stride = stride;
        b.conv1 = make_conv(name + ".conv1", Shape{co, ci, 3, 3, 3}, false);
        b.bn1 = make_bn(name + ".bn1", co);
        b.conv2 = make_conv(name + ".conv2", Shape{co, co, 3, 3, 3}, false);
        b.bn2 = make_bn(name + ".bn2", co);
        if (ci != co || stride != 1) {
            b.proj = make_conv(name + ".proj", Shape{co, ci, 1, 1, 1}, false);
            b.bn_proj = make_bn(name + ".bn_proj", co);
        }
        return b;
    }

    Block2d<T> make_block2d(const std::string& name, std::size_t ci, std::size_t co) {
        Block2d<T> b;
        b.conv1 = make_conv(name + ".conv1", Shape{co, ci, 3, 3});
        b.slope1 = add_const(name + ".prelu1", Shape{1}, T(0.25), true);
        b.conv2 = make_conv(name + ".conv2", Shape{co, co, 3, 3});
        b.slope2 = add_const(name + ".prelu2", Shape{1}, T(0.25), true);
        if (ci != co) b.proj = make_conv(name + ".proj", Shape{co, ci, 1, 1});
        return b;
    }

    void build() {
        const std::size_t D = cfg_.D, K = cfg_.K;
        const char* branch_names[2] = {"h", "v"};
        for (std::size_t br = 0; br < 2; ++br) {
            const std::string p = std::string("stem.") + branch_names[br];
            stem_[br][0] = make_conv(p + ".velocity", Shape{D, 2, K / 2, 1, 1}, false);
            stem_[br][1] = make_conv(p + ".collapse", Shape{D, D, 2, 1, 1}, false);
        }
        for (std::size_t br = 0; br < 2; ++br) {
            std::size_t ci = D;
            for (std::size_t i = 1; i <= cfg_.S; ++i) {
                const std::size_t co = cfg_.scale_channels(i);
                const std::string p = "enc." + std::string(branch_names[br]) + "." + std::to_string(i);
                enc_[br].push_back({make_block3d(p + ".block1", ci, co, i == 1 ? 1 : 2),
                                    make_block3d(p + ".block2", co, co, 1)});
                const std::size_t t_len = cfg_.N >> (i - 1);
                collapse_[br].push_back(make_conv(p + ".temporal", Shape{co, co, t_len, 1, 1}));
                ci = co;
            }
        }
        if (cfg_.fusion != Fusion::kNone) {
            for (std::size_t i = 1; i <= cfg_.S; ++i) {
                const std::size_t ch = cfg_.scale_channels(i), c2 = ch / 2;
                const std::string p = "att." + std::to_string(i);
                Attention<T> a;
                a.q_h = make_conv(p + ".q_h", Shape{c2, ch, 1, 1});
                a.k_h = make_conv(p + ".k_h", Shape{c2, ch, 1, 1});
                a.v_h = make_conv(p + ".v_h", Shape{c2, ch, 1, 1});
                a.q_v = make_conv(p + ".q_v", Shape{c2, ch, 1, 1});
                a.k_v = make_conv(p + ".k_v", Shape{c2, ch, 1, 1});
                a.v_v = make_conv(p + ".v_v", Shape{c2, ch, 1, 1});
                a.out_cross_h = make_conv(p + ".out_cross_h", Shape{ch, c2, 1, 1});
                a.out_cross_v = make_conv(p + ".out_cross_v", Shape{ch, c2, 1, 1});
                a.out_self_h = make_conv(p + ".out_self_h", Shape{ch, c2, 1, 1});
                a.out_self_v = make_conv(p + ".out_self_v", Shape{ch, c2, 1, 1});
                att_.push_back(a);
            }
        }
        dec_.resize(cfg_.S);
        for (std::size_t i = cfg_.S; i >= 1; --i) {
            const std::size_t in = cfg_.fused_channels(i) + (i < cfg_.S ? cfg_.scale_channels(i + 1) : 0);
            dec_[i - 1] = make_block2d("dec." + std::to_string(i), in, cfg_.scale_channels(i));
        }
        head_ = make_conv("head", Shape{cfg_.C, cfg_.scale_channels(1), 1, 1});
        // e.g. -4 starts the logits near the background level instead of 0.5.
        if (cfg_.head_bias)
            for (auto& v : head_.b.data()) v = static_cast<T>(*cfg_.head_bias);
        if (cfg_.use_gcn) {
            const std::size_t P = cfg_.H * cfg_.W / 4;
            const double bound =
                std::sqrt(3.0 / static_cast<double>(P)) / static_cast<double>(adjacency().max_degree() + 1);
            for (std::size_t l = 0; l < 3; ++l) gcn_w_[l] = add_tensor("gcn.w" + std::to_string(l + 1), Shape{P, P}, bound);
        }
    }

    // ---- forward pieces

    Tensor<T> bn(const Tensor<T>& x, const BatchNorm<T>& b) const {
        return batchnorm(x, b.gamma, b.beta, const_cast<BatchNormState<T>&>(b.state), training_);
    }

    Tensor<T> block3d(const Tensor<T>& x, const Block3d<T>& b) const {
        Conv3dParams p1;
        p1.stride = {b.stride, b.stride, b.stride};
        p1.padding = {1, 1, 1};
        Tensor<T> y = relu(bn(conv3d(x, b.conv1.w, b.conv1.b, p1), b.bn1));
        Conv3dParams p2;
        p2.padding = {1, 1, 1};
        y = bn(conv3d(y, b.conv2.w, b.conv2.b, p2), b.bn2);
        Tensor<T> sc = x;
        if (b.proj.w.defined()) {
            Conv3dParams pp;
            pp.stride = {b.stride, b.stride, b.stride};
            sc = bn(conv3d(x, b.proj.w, b.proj.b, pp), b.bn_proj);
        }
        return relu(add(y, sc));
    }

    Tensor<T> block2d(const Tensor<T>& x, const Block2d<T>& b) const {
        Conv2dParams p;
        p.padding = {1, 1};
        Tensor<T> y = prelu(conv2d(x, b.conv1.w, b.conv1.b, p), b.slope1);
        y = conv2d(y, b.conv2.w, b.conv2.b, p);
        const Tensor<T> sc = b.proj.w.defined() ? conv2d(x, b.proj.w, b.proj.b) : x;
        return prelu(add(y, sc), b.slope2);
    }

    ModelConfig cfg_;
    std::mt19937_64 rng_;
    bool training_ = true;
    std::vector<NamedTensor<T>> tensors_;
    std::array<std::array<Conv<T>, 2>, 2> stem_;
    std::array<std::vector<std::array<Block3d<T>, 2>>, 2> enc_;
    std::array<std::vector<Conv<T>>, 2> collapse_;
    std::vector<Attention<T>> att_;
    std::vector<Block2d<T>> dec_;
    Conv<T> head_;
    std::array<Tensor<T>, 3> gcn_w_;
};

}  // namespace radpose
