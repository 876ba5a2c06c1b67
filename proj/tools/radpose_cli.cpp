// radpose: simulate, preprocess, train, infer, eval, render, ablate, defaults.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "radpose/render.hpp"
#include "radpose/train.hpp"
#include "png_io.hpp"

namespace fs = std::filesystem;
using namespace radpose;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

void progress(const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); }

RunConfig load_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    json j;
    try {
        const auto bytes = io::read_file(path);
        j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw UsageError(path + ": " + e.what());
    }
    try {
        return run_config_from_json(j);
    } catch (const Error& e) {
        throw UsageError(path + ": " + e.what());
    }
}

template <class F>
void as_usage(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

void write_json(const fs::path& path, const json& j) { io::write_text(path, j.dump(2) + "\n"); }

std::vector<std::size_t> parse_k_list(const std::vector<std::string>& items) {
    std::vector<std::size_t> ks;
    for (const auto& s : items) {
        std::size_t pos = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(s, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != s.size() || s.empty()) throw UsageError("--k: '" + s + "' is not a positive integer");
        ks.push_back(v);
    }
    return ks;
}

// Windows of one split.  "train" holds all but the last `test_sequences`
// sequences, "test" the last ones, "all" everything.
std::vector<WindowRef> split_windows(const Dataset& ds, const std::string& split, std::size_t test_sequences) {
    const std::size_t n = ds.sequences.size();
    if (split == "all") return all_windows(ds);
    if (test_sequences >= n)
        throw Error("split '" + split + "' needs more than " + std::to_string(test_sequences) + " sequences, found " +
                    std::to_string(n) + " (use --split all)");
    if (split == "train") return windows_of(ds, 0, n - test_sequences);
    if (split == "test") return windows_of(ds, n - test_sequences, n);
    throw UsageError("unknown split '" + split + "' (expected train, test or all)");
}

void check_data_matches(const ModelConfig& mc, const Dataset& ds) {
    const Shape want{2, mc.K, mc.H, mc.W};
    if (ds.frame_shape != want)
        throw Error("data frames " + shape_str(ds.frame_shape) + " do not match the model input " + shape_str(want) +
                    "; check model K/H/W against the preprocessing settings");
    if (ds.kind != mc.input)
        throw Error(std::string("data holds ") + map_kind_name(ds.kind) + " maps but the model expects " +
                    map_kind_name(mc.input));
}

// ---------------------------------------------------------------------------
// Pose files: gt.json layout, with per-keypoint confidences on predictions.

struct PoseFile {
    SequenceInfo info;
    std::vector<double> confidence;  // per frame; 1 when absent
};

PoseFile read_pose_file(const fs::path& path) {
    const auto bytes = io::read_file(path);
    json j;
    try {
        j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    PoseFile p;
    p.info = gt_from_json(j, path.string());
    p.confidence.assign(p.info.ground_truth.size(), 1.0);
    for (const auto& fr : j.at("frames")) {
        if (!fr.contains("confidence")) continue;
        const auto c = fr.at("confidence").get<std::vector<double>>();
        if (c.size() != kNumKeypoints) throw FormatError(path.string() + ": confidence needs 14 values");
        double s = 0;
        for (double v : c) s += v;
        p.confidence.at(fr.at("frame").get<std::size_t>()) = s / static_cast<double>(kNumKeypoints);
    }
    return p;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string config, script = "mixed", out, precision = "f32";
    std::optional<std::size_t> sequences;
    std::optional<double> duration, snr_db;
    std::optional<std::uint64_t> seed;
    bool noiseless = false;
};

int cmd_simulate(const SimulateArgs& a) {
    RunConfig rc = load_config(a.config);
    DatasetConfig& dc = rc.dataset;
    as_usage([&] {
        if (a.script != "mixed") dc.scripts = {a.script};
        if (a.sequences) dc.sequences = *a.sequences;
        if (a.duration) dc.duration = *a.duration;
        if (a.seed) dc.seed = *a.seed;
        if (a.snr_db) dc.snr_db = *a.snr_db;
        if (a.noiseless) dc.snr_db.reset();
        if (dc.test_sequences >= dc.sequences) dc.test_sequences = 0;
        dc.validate();
        rc.radar.validate();
    });
    const ScalarTag tag = a.precision == "f64" ? ScalarTag::kF64 : ScalarTag::kF32;
    fs::create_directories(a.out);
    write_json(fs::path(a.out) / "simulation.json", {{"radar", to_json(rc.radar)}, {"dataset", to_json(dc)}});
    for (std::size_t id = 0; id < dc.sequences; ++id) {
        const SequencePlan plan = plan_sequence(dc, id, rc.radar.fps);
        const fs::path dir = fs::path(a.out) / sequence_dir_name(id);
        fs::create_directories(dir);
        const SceneSequence seq = simulate_sequence(rc.radar, dc, plan, [&](std::size_t f, const FramePair& fp) {
            write_cube(dir / frame_file_name(f, SensorOrientation::kHorizontal), fp.h, tag);
            write_cube(dir / frame_file_name(f, SensorOrientation::kVertical), fp.v, tag);
        });
        SequenceInfo info;
        info.script = plan.script;
        info.fps = rc.radar.fps;
        info.params = to_json(plan.params);
        info.ground_truth = seq.ground_truth;
        write_gt(dir / "gt.json", info);
        progress("simulate: " + dir.string() + " (" + plan.script + ", " + std::to_string(seq.frames.size()) +
                 " frame pairs)");
    }
    return 0;
}

// ---------------------------------------------------------------------------
// preprocess

int cmd_preprocess(const std::string& config, const std::string& in, const std::string& out, const std::string& mode,
                   const std::vector<std::string>& k_items) {
    const RunConfig rc = load_config(config);
    MapKind kind{};
    as_usage([&] {
        kind = parse_map_kind(mode);
        if (kind == MapKind::kHeatmap) throw Error("--mode: heatmap is not a preprocessing mode");
    });
    const std::vector<std::size_t> ks = k_items.empty() ? std::vector<std::size_t>{rc.preproc.K} : parse_k_list(k_items);
    std::vector<InputSpec> specs;
    for (std::size_t K : ks) {
        PreprocConfig p = rc.preproc;
        p.K = K;
        as_usage([&] { p.validate(rc.radar.cube_shape()); });
        specs.push_back({kind, K});
    }
    const bool sweep = ks.size() > 1;
    auto root_for = [&](std::size_t K) { return sweep ? fs::path(out) / ("k" + std::to_string(K)) : fs::path(out); };
    for (std::size_t K : ks) {
        PreprocConfig p = rc.preproc;
        p.K = K;
        fs::create_directories(root_for(K));
        write_json(root_for(K) / "preproc.json", {{"mode", mode}, {"preproc", to_json(p)}});
    }
    for (const auto& dir : sequence_dirs(in)) {
        const SequenceInfo info = read_gt(dir / "gt.json");
        for (std::size_t K : ks) fs::create_directories(root_for(K) / dir.filename());
        for (std::size_t f = 0; f < info.ground_truth.size(); ++f)
            for (auto o : {SensorOrientation::kHorizontal, SensorOrientation::kVertical}) {
                const AdcCube cube = read_cube(dir / frame_file_name(f, o));
                const auto maps = make_maps(cube, rc.preproc, specs);
                for (std::size_t i = 0; i < ks.size(); ++i)
                    write_map(root_for(ks[i]) / dir.filename() / frame_file_name(f, o, ".rmap"), maps[i]);
            }
        for (std::size_t K : ks) write_gt(root_for(K) / dir.filename() / "gt.json", info);
        progress("preprocess: " + dir.filename().string() + " (" + std::to_string(info.ground_truth.size()) +
                 " frames)");
    }
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string config, data, out, log, split = "train";
    std::optional<std::size_t> steps, batch;
    std::optional<double> lr;
    std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a) {
    RunConfig rc = load_config(a.config);
    as_usage([&] {
        if (a.steps) rc.train.steps = *a.steps;
        if (a.batch) rc.train.batch = *a.batch;
        if (a.lr) rc.train.lr = *a.lr;
        if (a.seed) rc.train.seed = rc.model.seed = *a.seed;
        rc.train.validate();
    });
    const Dataset ds = load_dataset(a.data);
    check_data_matches(rc.model, ds);
    const auto windows = split_windows(ds, a.split, rc.dataset.test_sequences);
    PoseModel<float> model(rc.model);
    progress("train: " + std::to_string(windows.size()) + " windows, " + std::to_string(rc.train.steps) + " steps");
    const auto log = train(model, ds, windows, rc.train, [&](const LogEntry& e) {
        if (e.step % 50 == 0 || e.step == rc.train.steps)
            progress("train: step " + std::to_string(e.step) + " loss " + fmt1(e.loss));
    });
    const json meta = {{"train", to_json(rc.train)},
                       {"split", a.split},
                       {"test_sequences", rc.dataset.test_sequences},
                       {"data", {{"kind", map_kind_name(ds.kind)},
                                 {"frame_shape", ds.frame_shape},
                                 {"sequences", ds.sequences.size()},
                                 {"windows", windows.size()}}},
                       {"final_loss", log.back().loss}};
    const fs::path out(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_checkpoint(out, make_checkpoint(model, log.size(), meta));
    const fs::path log_path = a.log.empty() ? fs::path(out).replace_extension(".loss.csv") : fs::path(a.log);
    io::write_text(log_path, log_csv(log));
    progress("train: wrote " + out.string() + " and " + log_path.string());
    return 0;
}

// ---------------------------------------------------------------------------
// infer

int cmd_infer(const std::string& ckpt_path, const std::string& data, const std::string& out, const std::string& split,
              bool heatmaps) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const PoseModel<float> model = model_from_checkpoint<float>(ckpt);
    const Dataset ds = load_dataset(data);
    check_data_matches(model.config(), ds);
    const auto dirs = sequence_dirs(data);
    const std::size_t test_sequences = ckpt.meta.value("test_sequences", DatasetConfig{}.test_sequences);
    const auto windows = split_windows(ds, split, test_sequences);
    const auto preds = predict(model, ds, windows, 8, heatmaps);
    std::map<std::size_t, std::vector<const Prediction*>> by_seq;
    for (const auto& p : preds) by_seq[p.window.sequence].push_back(&p);
    for (const auto& [s, list] : by_seq) {
        const fs::path dir = fs::path(out) / dirs[s].filename();
        fs::create_directories(dir);
        const SequenceInfo src = read_gt(dirs[s] / "gt.json");
        json frames = json::array();
        for (const Prediction* p : list) {
            json kps = json::array();
            for (std::size_t k = 0; k < kNumKeypoints; ++k)
                kps.push_back({p->pose.skeleton.coords[k].x, p->pose.skeleton.coords[k].y, 1});
            frames.push_back({{"frame", p->window.frame},
                              {"keypoints", kps},
                              {"confidence", std::vector<double>(p->pose.confidence.begin(), p->pose.confidence.end())}});
            if (heatmaps) {
                RadarMap m{MapKind::kHeatmap, static_cast<std::int64_t>(p->window.frame),
                           Tensor<double>(p->heatmaps.shape())};
                std::copy(p->heatmaps.data().begin(), p->heatmaps.data().end(), m.data.data().begin());
                write_map(dir / ("frame_" + std::to_string(p->window.frame) + "_hm.rmap"), m);
            }
        }
        write_json(dir / "pred.json", {{"script", src.script}, {"fps", src.fps}, {"frames", frames}});
    }
    progress("infer: " + std::to_string(preds.size()) + " frames in " + std::to_string(by_seq.size()) +
             " sequences -> " + out);
    return 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const std::string& pred, const std::string& gt, const std::string& out, const std::string& json_out,
             const std::string& label, bool plain) {
    std::vector<PosePair> pairs;
    for (const auto& dir : sequence_dirs(pred)) {
        const fs::path pf = fs::exists(dir / "pred.json") ? dir / "pred.json" : dir / "gt.json";
        const PoseFile p = read_pose_file(pf);
        const SequenceInfo g = read_gt(fs::path(gt) / dir.filename() / "gt.json");
        if (p.info.ground_truth.size() != g.ground_truth.size())
            throw FormatError(pf.string() + ": " + std::to_string(p.info.ground_truth.size()) + " frames, ground truth has " +
                              std::to_string(g.ground_truth.size()));
        for (std::size_t f = 0; f < g.ground_truth.size(); ++f)
            pairs.push_back({p.info.ground_truth[f], g.ground_truth[f], p.confidence[f]});
    }
    OksConfig cfg;
    cfg.ranked = !plain;
    const EvalReport r = evaluate(pairs, cfg);
    const std::string text = report_table(r, label) + "\n" + keypoint_table(r, label) + "\nframes\t" +
                             std::to_string(r.frames) + "\nmean_pixel_error\t" + fmt1(r.mean_pixel_error) + "\n";
    if (out.empty()) std::cout << text;
    else io::write_text(out, text);
    if (!json_out.empty()) write_json(json_out, report_to_json(r));
    return 0;
}

// ---------------------------------------------------------------------------
// render

int cmd_render(const std::string& heatmap, const std::string& pose, const std::string& gt, std::size_t frame,
               int channel, std::size_t scale, const std::string& out) {
    if (heatmap.empty() == pose.empty()) throw UsageError("render: give exactly one of --heatmap or --pose");
    Image img;
    if (!heatmap.empty()) {
        const RadarMap m = read_map(heatmap);
        std::size_t h = 0, w = 0;
        std::vector<double> plane;
        as_usage([&] { plane = map_plane(m, channel, &h, &w); });
        img = plane_image(plane, h, w);
    } else {
        img = Image(static_cast<std::size_t>(kCameraSize), static_cast<std::size_t>(kCameraSize), 3);
        if (!gt.empty()) {
            const SequenceInfo g = read_gt(gt);
            if (frame >= g.ground_truth.size()) throw UsageError("render: --frame out of range for " + gt);
            draw_skeleton(img, g.ground_truth[frame], {0, 200, 0});
        }
        const PoseFile p = read_pose_file(pose);
        if (frame >= p.info.ground_truth.size()) throw UsageError("render: --frame out of range for " + pose);
        draw_skeleton(img, p.info.ground_truth[frame], {255, 64, 32});
    }
    const fs::path path(out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_png(path, upscale(img, scale));
    return 0;
}

// ---------------------------------------------------------------------------
// ablate

struct Variant {
    const char* label;
    Fusion fusion;
    bool gcn;
};

constexpr std::array<Variant, 5> kVariants{{
    {"Baseline", Fusion::kNone, false},
    {"+CA", Fusion::kCross, false},
    {"+SA", Fusion::kSelf, false},
    {"+CSAM", Fusion::kCrossSelf, false},
    {"+CSAM+PRGCN", Fusion::kCrossSelf, true},
}};

int cmd_ablate(const std::string& config, const std::string& data, const std::string& out,
               const std::vector<std::string>& k_items, const std::vector<std::string>& modes,
               std::optional<std::size_t> steps) {
    RunConfig rc = load_config(config);
    if (steps) as_usage([&] { rc.train.steps = *steps; rc.train.validate(); });
    const std::vector<std::size_t> ks = k_items.empty() ? std::vector<std::size_t>{rc.preproc.K} : parse_k_list(k_items);
    std::vector<InputSpec> specs;
    for (const auto& m : modes) {
        MapKind kind{};
        as_usage([&] { kind = parse_map_kind(m); });
        if (kind == MapKind::kHeatmap) throw UsageError("--modes: heatmap is not a preprocessing mode");
        for (std::size_t K : ks) {
            PreprocConfig p = rc.preproc;
            p.K = K;
            as_usage([&] { p.validate(rc.radar.cube_shape()); });
            specs.push_back({kind, K});
        }
    }
    const auto sets = load_cube_datasets(data, rc.preproc, specs,
                                         [](std::size_t i) { progress("ablate: loaded sequence " + std::to_string(i)); });
    std::string text;
    json rows = json::array();
    std::map<std::string, std::vector<std::pair<std::size_t, double>>> k_sweep;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const Dataset& ds = sets[i];
        const auto train_w = split_windows(ds, "train", rc.dataset.test_sequences);
        const auto test_w = split_windows(ds, "test", rc.dataset.test_sequences);
        const std::string block = std::string(map_kind_name(specs[i].kind)) + " K=" + std::to_string(specs[i].K);
        text += "# " + block + "\n";
        bool header = true;
        for (const Variant& v : kVariants) {
            ModelConfig mc = rc.model;
            mc.K = specs[i].K;
            mc.input = specs[i].kind;
            mc.fusion = v.fusion;
            mc.use_gcn = v.gcn;
            as_usage([&] { mc.validate(); });
            check_data_matches(mc, ds);
            PoseModel<float> model(mc);
            progress("ablate: " + block + " " + v.label);
            train(model, ds, train_w, rc.train);
            const EvalReport r = evaluate(pose_pairs(ds, predict(model, ds, test_w)));
            const std::string t = report_table(r, v.label);
            text += header ? t : t.substr(t.find('\n') + 1);
            header = false;
            json row = report_to_json(r);
            row["input"] = map_kind_name(specs[i].kind);
            row["K"] = specs[i].K;
            row["variant"] = v.label;
            rows.push_back(row);
            if (v.gcn) k_sweep[map_kind_name(specs[i].kind)].emplace_back(specs[i].K, r.total.ap);
        }
        text += "\n";
    }
    text += "# K sweep, " + std::string(kVariants.back().label) + "\nInput";
    for (std::size_t K : ks) text += "\tK=" + std::to_string(K);
    text += "\n";
    for (const auto& [mode, list] : k_sweep) {
        text += mode;
        for (const auto& [K, ap] : list) text += "\t" + fmt1(ap);
        text += "\n";
    }
    fs::create_directories(out);
    io::write_text(fs::path(out) / "ablation.txt", text);
    write_json(fs::path(out) / "ablation.json", {{"config", to_json(rc)}, {"rows", rows}});
    std::cout << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Radar-to-pose toolkit: simulate, preprocess, train, infer, evaluate, render and ablate."};
    app.require_subcommand(1);

    std::string config;
    auto add_config = [&](CLI::App* c) {
        c->add_option("--config", config, "JSON run configuration (see `radpose defaults`)")->check(CLI::ExistingFile);
    };

    // defaults
    std::string profile = "full", defaults_out;
    auto* c_def = app.add_subcommand("defaults", "Print the default run configuration");
    c_def->add_option("--profile", profile, "full or reduced")->check(CLI::IsMember({"full", "reduced"}));
    c_def->add_option("--out", defaults_out, "Write to a file instead of stdout");

    // simulate
    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Synthesize paired radar ADC cubes and ground-truth keypoints");
    add_config(c_sim);
    c_sim->add_option("--script", sim.script, "Motion script, or 'mixed' to cycle through the configured scripts");
    c_sim->add_option("--sequences", sim.sequences, "Number of sequences");
    c_sim->add_option("--duration", sim.duration, "Seconds per sequence");
    c_sim->add_option("--seed", sim.seed, "Dataset seed");
    c_sim->add_option("--snr-db", sim.snr_db, "Receiver noise level");
    c_sim->add_flag("--noiseless", sim.noiseless, "Disable receiver noise");
    c_sim->add_option("--precision", sim.precision, "Cube sample precision")->check(CLI::IsMember({"f32", "f64"}));
    c_sim->add_option("--out", sim.out, "Output directory")->required();

    // preprocess
    std::string pre_in, pre_out, pre_mode = "vrdae";
    std::vector<std::string> pre_k;
    auto* c_pre = app.add_subcommand("preprocess", "Turn ADC cubes into radar maps (.rmap)");
    add_config(c_pre);
    c_pre->add_option("--in", pre_in, "Simulated data directory (seq_* subdirectories)")->required();
    c_pre->add_option("--mode", pre_mode, "ra, rae or vrdae");
    c_pre->add_option("--k", pre_k, "Velocity bins; several values (e.g. 2,4,8,16) write one k<K>/ tree each")
        ->delimiter(',');
    c_pre->add_option("--out", pre_out, "Output directory")->required();

    // train
    TrainArgs tr;
    auto* c_tr = app.add_subcommand("train", "Train a model on preprocessed maps");
    add_config(c_tr);
    c_tr->add_option("--data", tr.data, "Preprocessed data directory")->required();
    c_tr->add_option("--out", tr.out, "Checkpoint path")->required();
    c_tr->add_option("--log", tr.log, "Loss log path (default: <out>.loss.csv)");
    c_tr->add_option("--split", tr.split, "train (all but the test sequences) or all")
        ->check(CLI::IsMember({"train", "all"}));
    c_tr->add_option("--steps", tr.steps, "Optimizer steps");
    c_tr->add_option("--batch", tr.batch, "Windows per batch");
    c_tr->add_option("--lr", tr.lr, "Learning rate");
    c_tr->add_option("--seed", tr.seed, "Seed for initialization and batch order");

    // infer
    std::string inf_ckpt, inf_data, inf_out, inf_split = "test";
    bool inf_hm = false;
    auto* c_inf = app.add_subcommand("infer", "Predict keypoints with a trained checkpoint");
    c_inf->add_option("--checkpoint", inf_ckpt, "Checkpoint from `radpose train`")->required();
    c_inf->add_option("--data", inf_data, "Preprocessed data directory")->required();
    c_inf->add_option("--out", inf_out, "Output directory")->required();
    c_inf->add_option("--split", inf_split, "test or all")->check(CLI::IsMember({"test", "all"}));
    c_inf->add_flag("--heatmaps", inf_hm, "Also dump refined heatmaps as .rmap files");

    // eval
    std::string ev_pred, ev_gt, ev_out, ev_json, ev_label = "model";
    bool ev_plain = false;
    auto* c_ev = app.add_subcommand("eval", "Score predictions against ground truth (OKS-based AP)");
    c_ev->add_option("--pred", ev_pred, "Prediction directory (pred.json, or gt.json, per sequence)")->required();
    c_ev->add_option("--gt", ev_gt, "Ground-truth directory")->required();
    c_ev->add_option("--out", ev_out, "Report path (default: stdout)");
    c_ev->add_option("--json", ev_json, "Also write the report as JSON");
    c_ev->add_option("--label", ev_label, "Row label");
    c_ev->add_flag("--plain", ev_plain, "AP as the plain fraction of frames above each threshold");

    // render
    std::string rn_hm, rn_pose, rn_gt, rn_out;
    std::size_t rn_frame = 0, rn_scale = 1;
    int rn_channel = -1;
    auto* c_rn = app.add_subcommand("render", "Write a PNG of a heatmap / radar map or of a skeleton");
    c_rn->add_option("--heatmap", rn_hm, ".rmap file (heatmap dump or radar map)");
    c_rn->add_option("--channel", rn_channel, "Heatmap channel (default: maximum over channels)");
    c_rn->add_option("--pose", rn_pose, "pred.json or gt.json to draw");
    c_rn->add_option("--gt", rn_gt, "gt.json drawn underneath --pose");
    c_rn->add_option("--frame", rn_frame, "Frame index for --pose");
    c_rn->add_option("--scale", rn_scale, "Integer enlargement")->check(CLI::Range(1, 64));
    c_rn->add_option("--out", rn_out, "PNG path")->required();

    // ablate
    std::string ab_data, ab_out;
    std::vector<std::string> ab_k, ab_modes{"rae", "vrdae"};
    std::optional<std::size_t> ab_steps;
    auto* c_ab = app.add_subcommand("ablate", "Train and score the fusion variants for each input and K");
    add_config(c_ab);
    c_ab->add_option("--data", ab_data, "Simulated data directory (ADC cubes)")->required();
    c_ab->add_option("--out", ab_out, "Output directory")->required();
    c_ab->add_option("--k", ab_k, "Velocity bins to sweep, e.g. 2,4,8,16")->delimiter(',');
    c_ab->add_option("--modes", ab_modes, "Inputs to compare")->delimiter(',');
    c_ab->add_option("--steps", ab_steps, "Optimizer steps per model");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (c_def->parsed()) {
            const std::string text = to_json(profile_config(profile)).dump(2) + "\n";
            if (defaults_out.empty()) std::cout << text;
            else io::write_text(defaults_out, text);
            return 0;
        }
        if (c_sim->parsed()) {
            sim.config = config;
            return cmd_simulate(sim);
        }
        if (c_pre->parsed()) return cmd_preprocess(config, pre_in, pre_out, pre_mode, pre_k);
        if (c_tr->parsed()) {
            tr.config = config;
            return cmd_train(tr);
        }
        if (c_inf->parsed()) return cmd_infer(inf_ckpt, inf_data, inf_out, inf_split, inf_hm);
        if (c_ev->parsed()) return cmd_eval(ev_pred, ev_gt, ev_out, ev_json, ev_label, ev_plain);
        if (c_rn->parsed()) return cmd_render(rn_hm, rn_pose, rn_gt, rn_frame, rn_channel, rn_scale, rn_out);
        if (c_ab->parsed()) return cmd_ablate(config, ab_data, ab_out, ab_k, ab_modes, ab_steps);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n\n%s", e.what(), app.help().c_str());
        return 1;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
