// Acceptance run: one PASS/FAIL line per criterion.  Exit status is the
// number of failed criteria (capped at 255).
//
//   acceptance [--only 1,4,8] [--trend-steps N] [--json report.json]

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "gradcheck.hpp"
#include "radpose/checkpoint.hpp"
#include "radpose/config.hpp"
#include "radpose/dataset.hpp"
#include "radpose/eval.hpp"
#include "radpose/model.hpp"
#include "radpose/preproc.hpp"
#include "radpose/train.hpp"

using namespace radpose;
using namespace radpose::test;
using cd = std::complex<double>;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---------------------------------------------------------------------------
// 1-3: signal chain

AdcCube random_cube(Shape shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    ComplexTensor t(shape);
    for (auto& v : t.data()) v = {nd(rng), nd(rng)};
    return {0, t};
}

// Direct 4D DFT.  Output bin k of a centred axis of length n holds frequency
// (k - n/2) mod n; the range axis is uncentred.
ComplexTensor dft4(const ComplexTensor& x, std::size_t nr, std::size_t np, std::size_t nq) {
    const std::size_t N = x.dim(0), M = x.dim(1), P = x.dim(2), Q = x.dim(3);
    ComplexTensor out(Shape{nr, M, np, nq});
    auto freq = [](std::size_t k, std::size_t n) { return double((k + n - n / 2) % n) / double(n); };
    for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t d = 0; d < M; ++d)
            for (std::size_t a = 0; a < np; ++a)
                for (std::size_t e = 0; e < nq; ++e) {
                    const double fr = double(r) / double(N), fd = freq(d, M), fa = freq(a, np), fe = freq(e, nq);
                    cd acc = 0;
                    for (std::size_t n = 0; n < N; ++n)
                        for (std::size_t m = 0; m < M; ++m)
                            for (std::size_t p = 0; p < P; ++p)
                                for (std::size_t q = 0; q < Q; ++q) {
                                    const double ph = fr * double(n) + fd * double(m) + fa * double(p) + fe * double(q);
                                    acc += x.at({n, m, p, q}) * std::polar(1.0, -2.0 * std::numbers::pi * ph);
                                }
                    out.at({r, d, a, e}) = acc;
                }
    return out;
}

std::array<std::size_t, 4> argmax4(const ComplexTensor& x) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < x.numel(); ++i)
        if (std::abs(x[i]) > std::abs(x[best])) best = i;
    std::array<std::size_t, 4> idx{};
    for (std::size_t ax = 4; ax-- > 0;) {
        idx[ax] = best % x.dim(ax);
        best /= x.dim(ax);
    }
    return idx;
}

PointTarget boresight_target(double r, double v = 0) {
    const SensorPose pose;
    return {pose.position + Vec3{0, r, 0}, Vec3{0, -v, 0}, 1.0};
}

Outcome fft_oracle() {
    const auto t0 = Clock::now();
    const auto cube = random_cube({8, 8, 8, 2}, 2024);
    PreprocConfig cfg;
    cfg.range_start = 0;
    cfg.range_len = 8;
    cfg.az_pad = 8;
    cfg.el_pad = 2;
    cfg.K = 8;
    const ComplexTensor got = make_rdae(cube, cfg), want = dft4(cube.data, 8, 8, 2);
    double err = 0;
    for (std::size_t i = 0; i < want.numel(); ++i) err = std::max(err, std::abs(got[i] - want[i]));
    const double s = seconds_since(t0);
    return {err < 1e-9 && s < 10, fmt("max abs error %.3g (limit 1e-9), %.2f s (limit 10 s)", err, s)};
}

Outcome physics_peak() {
    const auto t0 = Clock::now();
    const RadarConfig rc;
    const PreprocConfig cfg;
    const auto idx = argmax4(make_rdae(synthesize_frame(rc, {boresight_target(2.40)}, 0), cfg));
    const std::size_t range_bin = cfg.range_start + idx[0];
    auto near = [](std::size_t a, std::size_t b) { return (a > b ? a - b : b - a) <= 1; };
    const bool ok = near(range_bin, 50) && near(idx[1], rc.n_chirps / 2) && near(idx[2], cfg.az_pad / 2);
    const double s = seconds_since(t0);
    return {ok && s < 5, fmt("peak range %zu (want 50), doppler %zu (want %zu), azimuth %zu (want %zu), %.2f s", range_bin,
                             idx[1], rc.n_chirps / 2, idx[2], cfg.az_pad / 2, s)};
}

Outcome velocity_slice() {
    const RadarConfig rc;
    PreprocConfig cfg;
    cfg.K = 8;
    const auto cube = synthesize_frame(rc, {boresight_target(2.40, 2.0 * rc.doppler_bin_width())}, 0);
    const auto idx = argmax4(merge_complex(make_vrdae(cube, cfg).data));
    return {idx[0] == cfg.K / 2 + 2, fmt("peak slice %zu (want %zu)", idx[0], cfg.K / 2 + 2)};
}

// ---------------------------------------------------------------------------
// 4-6: model

ModelConfig tiny_config(std::uint64_t seed) {
    ModelConfig c;
    c.N = 4;
    c.K = 4;
    c.D = 2;
    c.S = 2;
    c.H = 8;
    c.W = 8;
    c.seed = seed;
    return c;
}

std::vector<TensorD> params_with_prefix(PoseModel<double>& m, const std::string& prefix) {
    std::vector<TensorD> out;
    for (auto& t : m.tensors())
        if (t.trainable && t.name.rfind(prefix, 0) == 0) out.push_back(t.tensor);
    if (out.empty()) throw Error("no parameters under " + prefix);
    return out;
}

std::vector<TensorD> with(std::vector<TensorD> a, std::initializer_list<TensorD> b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

Outcome gradient_suite() {
    constexpr int kTrials = 20;
    constexpr double kTol = 1e-4, kStep = 1e-7;
    const auto t0 = Clock::now();
    std::mt19937_64 rng(4000);
    using Case = std::function<GradCheckResult(int)>;
    const std::vector<std::pair<std::string, Case>> cases = {
        {"stem",
         [&](int t) {
             PoseModel<double> m(tiny_config(t));
             auto x = random_tensor({2, 4, 2, 4, 8, 8, 2}, rng);
             return check_gradients(with(params_with_prefix(m, "stem.h"), {x}), [&] { return m.stem(x, 0); }, rng, 6,
                                    kStep);
         }},
        {"encoder",
         [&](int t) {
             PoseModel<double> m(tiny_config(t));
             auto x = random_tensor({2, 4, 4, 8, 8}, rng);
             return check_gradients(with(params_with_prefix(m, "enc.h.2."), {x}),
                                    [&] { return m.encode_scale(x, 0, 2).second; }, rng, 6, kStep);
         }},
        {"csam",
         [&](int t) {
             PoseModel<double> m(tiny_config(t));
             auto fh = random_tensor({2, 4, 4, 4}, rng), fv = random_tensor({2, 4, 4, 4}, rng);
             return check_gradients(with(params_with_prefix(m, "att.1."), {fh, fv}), [&] { return m.fuse(fh, fv, 1); },
                                    rng, 6, kStep);
         }},
        {"decoder",
         [&](int t) {
             PoseModel<double> m(tiny_config(t));
             auto f1 = random_tensor({2, 16, 8, 8}, rng), f2 = random_tensor({2, 32, 4, 4}, rng);
             auto vars = with(params_with_prefix(m, "dec."), {f1, f2, m.tensor("head.weight"), m.tensor("head.bias")});
             return check_gradients(vars, [&] { return m.decode({f1, f2}); }, rng, 6, kStep);
         }},
        {"prgcn",
         [&](int t) {
             PoseModel<double> m(tiny_config(t));
             auto logits = random_tensor({2, 14, 8, 8}, rng, -2, 2);
             for (auto& w : params_with_prefix(m, "gcn."))
                 for (auto& v : w.data()) v *= 20.0;  // wake the relu layers
             return check_gradients(with(params_with_prefix(m, "gcn."), {logits}), [&] { return m.refine(logits); },
                                    rng, 6, kStep);
         }},
        {"loss",
         [&](int) {
             auto coarse = random_tensor({2, 14, 4, 4}, rng, 0.05, 0.95);
             auto refined = random_tensor({2, 14, 4, 4}, rng, 0.05, 0.95);
             auto target = random_tensor({2, 14, 4, 4}, rng, 0.0, 1.0, false);
             std::vector<double> vis(28, 1.0);
             vis[5] = 0.0;
             return check_gradients(
                 {coarse, refined},
                 [&] { return PoseModel<double>::two_term_loss(coarse, refined, target, 0.7, vis); }, rng, 6, kStep);
         }},
    };
    bool ok = true;
    std::string detail;
    for (const auto& [name, run] : cases) {
        double worst = 0;
        int failed = 0;
        for (int t = 0; t < kTrials; ++t) {
            const double e = run(t).worst();
            worst = std::max(worst, e);
            failed += !(e < kTol);
        }
        ok = ok && failed == 0;
        detail += fmt("%s %.1e%s, ", name.c_str(), worst, failed ? fmt(" (%d/%d bad)", failed, kTrials).c_str() : "");
    }
    const double s = seconds_since(t0);
    return {ok && s < 120, detail + fmt("%d trials each, worst rel err vs 1e-4, %.1f s (limit 120 s)", kTrials, s)};
}

std::array<TensorD, 3> gcn_weights(std::mt19937_64& rng, std::size_t p) {
    return {random_tensor({p, p}, rng, -0.5, 0.5, false), random_tensor({p, p}, rng, -0.5, 0.5, false),
            random_tensor({p, p}, rng, -0.5, 0.5, false)};
}

Outcome gcn_structure() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(5000);
    const auto w = gcn_weights(rng, 16);
    constexpr std::size_t C = kNumKeypoints, P = 64;  // 8 x 8 pixels per node

    // (a) no edges: every node sees only itself.
    bool decoupled = true;
    {
        std::vector<double> eye(C * C, 0.0);
        for (std::size_t i = 0; i < C; ++i) eye[i * C + i] = 1.0;
        auto x = random_tensor({1, C, 8, 8}, rng, -2, 2, false);
        const auto ref = PoseModel<double>::gcn(x, eye, w);
        for (std::size_t j = 0; j < C; ++j) {
            TensorD y = x.clone();
            for (std::size_t i = 0; i < P; ++i) y[j * P + i] = 3.0;
            const auto out = PoseModel<double>::gcn(y, eye, w);
            for (std::size_t n = 0; n < C; ++n)
                for (std::size_t i = 0; n != j && i < P; ++i) decoupled = decoupled && out[n * P + i] == ref[n * P + i];
        }
    }

    // (b) three layers reach three hops and no further.
    bool local = true;
    std::size_t far_pairs = 0, near_changed = 0;
    {
        const auto a_hat = adjacency().a_hat<double>();
        auto x = random_tensor({1, C, 8, 8}, rng, -2, 2, false);
        const auto ref = PoseModel<double>::gcn(x, a_hat, w);
        for (std::size_t j = 0; j < C; ++j) {
            TensorD y = x.clone();
            for (std::size_t k = 0; k < P; ++k) y[j * P + k] = 0.0;
            const auto out = PoseModel<double>::gcn(y, a_hat, w);
            const auto hops = adjacency().hops_from(j);
            for (std::size_t i = 0; i < C; ++i) {
                bool same = true;
                for (std::size_t k = 0; k < P; ++k) same = same && out[i * P + k] == ref[i * P + k];
                if (hops[i] > 3) {
                    local = local && same;
                    ++far_pairs;
                } else {
                    near_changed += !same;
                }
            }
        }
        local = local && far_pairs > 0 && near_changed > 0;
    }

    // (c) relabelling nodes relabels outputs, bit for bit.
    bool equivariant = true;
    {
        const auto a_hat = adjacency().a_hat<double>();
        auto x = random_tensor({2, C, 8, 8}, rng, -2, 2, false);
        const auto ref = PoseModel<double>::gcn(x, a_hat, w);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<std::size_t> perm(C);
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            std::vector<double> pa(C * C);
            for (std::size_t i = 0; i < C; ++i)
                for (std::size_t j = 0; j < C; ++j) pa[i * C + j] = a_hat[perm[i] * C + perm[j]];
            TensorD px({2, C, 8, 8});
            for (std::size_t b = 0; b < 2; ++b)
                for (std::size_t i = 0; i < C; ++i)
                    for (std::size_t k = 0; k < P; ++k) px[(b * C + i) * P + k] = x[(b * C + perm[i]) * P + k];
            const auto out = PoseModel<double>::gcn(px, pa, w);
            for (std::size_t b = 0; b < 2; ++b)
                for (std::size_t i = 0; i < C; ++i)
                    for (std::size_t k = 0; k < P; ++k)
                        equivariant = equivariant && out[(b * C + i) * P + k] == ref[(b * C + perm[i]) * P + k];
        }
    }
    const double s = seconds_since(t0);
    return {decoupled && local && equivariant && s < 10,
            fmt("decoupling %s, 3-hop locality %s (%zu far pairs unchanged), permutation %s, %.2f s (limit 10 s)",
                decoupled ? "ok" : "BROKEN", local ? "ok" : "BROKEN", far_pairs, equivariant ? "bitwise" : "BROKEN",
                s)};
}

Outcome loss_value() {
    const TensorD half({1}, 0.5), one({1}, 1.0);
    const double l = PoseModel<double>::two_term_loss(half, half, one, 1.0).item();
    const double err = std::abs(l - 2.0 * std::log(2.0));
    return {err <= 1e-12, fmt("loss %.17g, |loss - 2 ln 2| = %.2g (limit 1e-12)", l, err)};
}

// ---------------------------------------------------------------------------
// 7: metrics

Outcome metrics() {
    const OksConfig cfg;
    Skeleton2D gt, pred;
    for (std::size_t k = 0; k < kNumKeypoints; ++k) gt.coords[k] = pred.coords[k] = {100.0 + 5.0 * double(k), 80.0 + 7.0 * double(k % 5)};
    const double s = 40.0;
    const double d = s * cfg.k[kRElbow] * std::sqrt(2.0);
    pred.coords[kRElbow].x += d / std::sqrt(2.0);
    pred.coords[kRElbow].y -= d / std::sqrt(2.0);
    std::array<bool, kNumKeypoints> only{};
    only[kRElbow] = true;
    const double v = oks(pred, gt, cfg, only, s * s);
    const double oks_err = std::abs(v - std::exp(-1.0));

    std::vector<ScoredFrame> frames;
    for (int i = 0; i < 25; ++i) frames.push_back({0.6, 0.1 + 0.03 * i});
    const auto th = default_oks_thresholds();
    const ApResult r = average_precision(frames, th);
    const bool ap_ok = r.ap50 == 100.0 && r.ap75 == 0.0 && r.ap == 20.0;
    return {oks_err <= 1e-12 && ap_ok,
            fmt("OKS %.15f vs exp(-1) err %.1g; AP %.17g, AP50 %.17g, AP75 %.17g (want 20, 100, 0)", v, oks_err, r.ap,
                r.ap50, r.ap75)};
}

// ---------------------------------------------------------------------------
// 8-9: trends on a fixed synthetic dataset

struct TrendSettings {
    std::size_t steps = 1500;
};

struct TrendModel {
    std::string name;
    InputSpec spec;
    EvalReport report;
    double final_loss = 0;
};

struct TrendRun {
    std::vector<TrendModel> models;
    double seconds = 0;
    std::string error;
};

RunConfig trend_config(const TrendSettings& ts) {
    RunConfig rc = RunConfig::reduced();
    rc.dataset.sequences = 20;
    rc.dataset.duration = 15.0;
    rc.dataset.seed = 0;
    rc.train.steps = ts.steps;
    rc.train.seed = 0;
    rc.model.seed = 0;
    rc.validate();
    return rc;
}

TrendRun run_trends(const TrendSettings& ts, const std::vector<std::pair<std::string, InputSpec>>& wanted) {
    const auto t0 = Clock::now();
    TrendRun run;
    try {
        const RunConfig rc = trend_config(ts);
        std::vector<InputSpec> specs;
        for (const auto& w : wanted) specs.push_back(w.second);
        std::fprintf(stderr, "[trend] simulating %zu sequences x %.0f s\n", rc.dataset.sequences, rc.dataset.duration);
        const auto datasets = build_datasets(rc.radar, rc.preproc, rc.dataset, specs, [&](std::size_t id) {
            std::fprintf(stderr, "[trend]   sequence %zu done, %.0f s\n", id, seconds_since(t0));
        });
        const std::size_t n_train = rc.dataset.sequences - rc.dataset.test_sequences;
        for (std::size_t i = 0; i < wanted.size(); ++i) {
            const Dataset& ds = datasets[i];
            ModelConfig mc = rc.model;
            mc.input = specs[i].kind;
            mc.K = specs[i].K;
            PoseModel<float> model(mc);
            const auto log = train(model, ds, windows_of(ds, 0, n_train), rc.train, [&](const LogEntry& e) {
                if (e.step % 100 == 0)
                    std::fprintf(stderr, "[trend] %s step %zu loss %.1f, %.0f s\n", wanted[i].first.c_str(), e.step,
                                 e.loss, seconds_since(t0));
            });
            const auto preds = predict(model, ds, windows_of(ds, n_train, ds.sequences.size()));
            const auto pairs = pose_pairs(ds, preds);
            run.models.push_back({wanted[i].first, specs[i], evaluate(pairs), log.back().loss});
            std::fprintf(stderr, "%s", report_table(run.models.back().report, wanted[i].first).c_str());
        }
    } catch (const std::exception& e) {
        run.error = e.what();
    }
    run.seconds = seconds_since(t0);
    return run;
}

const TrendModel* find_model(const TrendRun& r, const std::string& name) {
    for (const auto& m : r.models)
        if (m.name == name) return &m;
    return nullptr;
}

Outcome compare_trend(const TrendRun& r, const std::string& hi, const std::string& lo) {
    if (!r.error.empty()) return {false, "trend run failed: " + r.error};
    const TrendModel *a = find_model(r, hi), *b = find_model(r, lo);
    if (!a || !b) return {false, "missing model"};
    const bool ok = a->report.total.ap > b->report.total.ap && r.seconds <= 7200;
    return {ok, fmt("AP %s %.2f vs %s %.2f (AP50 %.1f vs %.1f), final loss %.0f vs %.0f, run %.0f s (limit 7200 s)",
                    hi.c_str(), a->report.total.ap, lo.c_str(), b->report.total.ap, a->report.total.ap50,
                    b->report.total.ap50, a->final_loss, b->final_loss, r.seconds)};
}

// ---------------------------------------------------------------------------
// 10: overfit one window

Outcome overfit() {
    const auto t0 = Clock::now();
    RunConfig rc = RunConfig::reduced();
    rc.dataset.sequences = 1;
    rc.dataset.duration = 2.0;
    rc.dataset.test_sequences = 0;
    rc.dataset.seed = 7;
    const auto ds = build_datasets(rc.radar, rc.preproc, rc.dataset, {{MapKind::kVRDAE, rc.model.K}}).front();
    const WindowRef sample{0, ds.sequences[0].gt.size() / 2};
    rc.model.fusion = Fusion::kCrossSelf;
    rc.model.use_gcn = true;
    PoseModel<float> model(rc.model);
    TrainOptions opts = rc.train;
    opts.steps = 500;
    opts.batch = 1;
    const auto log = train(model, ds, {sample}, opts);
    const double first = log.front().loss, last = log.back().loss;
    const double drop = 1.0 - last / first;
    const auto pred = predict(model, ds, {sample}).front().pose.skeleton;
    const Skeleton2D& gt = ds.sequences[0].gt[sample.frame];
    auto cell_gap = [&](double a, double b, std::size_t n) {
        const auto ca = static_cast<long>(camera_to_cell(a, n)), cb = static_cast<long>(camera_to_cell(b, n));
        return std::labs(ca - cb);
    };
    const long gap = std::max(cell_gap(pred.coords[kHead].x, gt.coords[kHead].x, rc.model.W),
                              cell_gap(pred.coords[kHead].y, gt.coords[kHead].y, rc.model.H));
    const double s = seconds_since(t0);
    return {drop >= 0.9 && gap <= 2 && s <= 600,
            fmt("loss %.1f -> %.1f (drop %.1f%%, need 90%%), head off by %ld cells (limit 2), %.0f s (limit 600 s)",
                first, last, 100.0 * drop, gap, s)};
}

// ---------------------------------------------------------------------------
// 11: determinism

struct SmallRun {
    std::vector<char> checkpoint;
    std::string report;
};

SmallRun small_run() {
    RunConfig rc = RunConfig::reduced();
    rc.dataset.sequences = 2;
    rc.dataset.duration = 2.0;
    rc.dataset.test_sequences = 1;
    rc.dataset.seed = 11;
    rc.model.N = 4;
    rc.train.steps = 12;
    rc.train.batch = 2;
    rc.train.seed = 3;
    rc.model.seed = 5;
    const auto ds = build_datasets(rc.radar, rc.preproc, rc.dataset, {{MapKind::kVRDAE, rc.model.K}}).front();
    PoseModel<float> model(rc.model);
    const auto log = train(model, ds, windows_of(ds, 0, 1), rc.train);
    const auto preds = predict(model, ds, windows_of(ds, 1, 2));
    const EvalReport r = evaluate(pose_pairs(ds, preds));
    SmallRun out;
    out.checkpoint = encode_checkpoint(make_checkpoint(model, log.size(), {{"log", to_json(log)}}));
    out.report = report_to_json(r).dump() + "\n" + report_table(r) + keypoint_table(r);
    return out;
}

Outcome determinism() {
    const SmallRun a = small_run(), b = small_run();
    const bool ck = a.checkpoint == b.checkpoint, rep = a.report == b.report;
    return {ck && rep, fmt("checkpoints (%zu bytes) %s, reports %s", a.checkpoint.size(), ck ? "identical" : "DIFFER",
                           rep ? "identical" : "DIFFER")};
}

std::set<int> parse_only(const std::string& s) {
    std::set<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const int v = std::stoi(item);
        if (v < 1 || v > 11) throw Error("--only: criteria are numbered 1 to 11");
        out.insert(v);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app("Acceptance criteria");
    std::string only, json_path;
    TrendSettings ts;
    app.add_option("--only", only, "Comma-separated criteria to run (default all)");
    app.add_option("--trend-steps", ts.steps, "Training steps per model for the trend criteria")->check(CLI::PositiveNumber);
    app.add_option("--json", json_path, "Also write results as JSON");
    CLI11_PARSE(app, argc, argv);

    std::set<int> selected;
    try {
        selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11} : parse_only(only);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 255;
    }

    std::optional<TrendRun> trend;
    auto trends = [&]() -> const TrendRun& {
        if (!trend) {
            std::vector<std::pair<std::string, InputSpec>> wanted{{"VRDAE K=8", {MapKind::kVRDAE, 8}}};
            if (selected.count(8)) wanted.push_back({"VRDAE K=2", {MapKind::kVRDAE, 2}});
            if (selected.count(9)) wanted.push_back({"RAE K=8", {MapKind::kRAE, 8}});
            trend = run_trends(ts, wanted);
        }
        return *trend;
    };

    const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
        {1, {"FFT-oracle equivalence", fft_oracle}},
        {2, {"physics recovery", physics_peak}},
        {3, {"velocity-slice correctness", velocity_slice}},
        {4, {"gradient suite", gradient_suite}},
        {5, {"PRGCN structure", gcn_structure}},
        {6, {"loss value", loss_value}},
        {7, {"metric correctness", metrics}},
        {8, {"trend: VRDAE K=8 beats K=2", [&] { return compare_trend(trends(), "VRDAE K=8", "VRDAE K=2"); }}},
        {9, {"trend: VRDAE beats RAE", [&] { return compare_trend(trends(), "VRDAE K=8", "RAE K=8"); }}},
        {10, {"overfit smoke test", overfit}},
        {11, {"determinism", determinism}},
    };

    int failed = 0;
    nlohmann::json results = nlohmann::json::array();
    for (int id : selected) {
        const auto& [name, run] = criteria.at(id);
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = seconds_since(t0);
        failed += !o.pass;
        std::printf("criterion %2d %s  %s: %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), s);
        std::fflush(stdout);
        results.push_back({{"criterion", id}, {"name", name}, {"pass", o.pass}, {"detail", o.detail}, {"seconds", s}});
    }
    if (trend && trend->error.empty()) {
        for (const auto& m : trend->models) std::printf("%s", report_table(m.report, m.name).c_str());
    }
    std::printf("%zu/%zu criteria passed\n", selected.size() - failed, selected.size());
    if (!json_path.empty()) std::ofstream(json_path) << results.dump(2) << "\n";
    return std::min(failed, 255);
}
