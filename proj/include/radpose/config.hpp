#pragma once

// JSON run configuration: radar, pre-processing, dataset, model and training
// sections.  Unknown keys are rejected everywhere; missing keys keep defaults.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "radpose/model.hpp"
#include "radpose/preproc.hpp"
#include "radpose/radar.hpp"
#include "radpose/scenes.hpp"

namespace radpose {

using nlohmann::json;

namespace detail {

// Visits every key of `j`; `f(key, value)` returns false for unknown keys.
template <class F>
void read_section(const json& j, const std::string& section, F&& f) {
    if (!j.is_object()) throw Error(section + ": expected a JSON object");
    try {
        for (const auto& [key, v] : j.items())
            if (!f(key, v)) throw Error(section + ": unknown key '" + key + "'");
    } catch (const json::exception& e) {
        throw Error(section + ": " + e.what());
    }
}

inline const char* window_name(Window w) { return w == Window::kHann ? "hann" : "rect"; }

inline Window parse_window(const std::string& s) {
    if (s == "rect") return Window::kRect;
    if (s == "hann") return Window::kHann;
    throw Error("unknown window '" + s + "' (expected rect or hann)");
}

}  // namespace detail

inline json to_json(const RadarConfig& c) {
    return {{"n_adc", c.n_adc},
            {"n_chirps", c.n_chirps},
            {"n_az_rx", c.n_az_rx},
            {"n_el_rx", c.n_el_rx},
            {"freq_slope", c.freq_slope},
            {"sample_rate", c.sample_rate},
            {"chirp_duration", c.chirp_duration},
            {"fps", c.fps},
            {"carrier_wavelength", c.carrier_wavelength},
            {"antenna_spacing", c.antenna_spacing},
            {"range_resolution", c.range_resolution},
            {"max_range", c.max_range}};
}

inline RadarConfig radar_config_from_json(const json& j) {
    RadarConfig c;
    detail::read_section(j, "radar", [&](const std::string& k, const json& v) {
        if (k == "n_adc") c.n_adc = v.get<std::size_t>();
        else if (k == "n_chirps") c.n_chirps = v.get<std::size_t>();
        else if (k == "n_az_rx") c.n_az_rx = v.get<std::size_t>();
        else if (k == "n_el_rx") c.n_el_rx = v.get<std::size_t>();
        else if (k == "freq_slope") c.freq_slope = v.get<double>();
        else if (k == "sample_rate") c.sample_rate = v.get<double>();
        else if (k == "chirp_duration") c.chirp_duration = v.get<double>();
        else if (k == "fps") c.fps = v.get<double>();
        else if (k == "carrier_wavelength") c.carrier_wavelength = v.get<double>();
        else if (k == "antenna_spacing") c.antenna_spacing = v.get<double>();
        else if (k == "range_resolution") c.range_resolution = v.get<double>();
        else if (k == "max_range") c.max_range = v.get<double>();
        else return false;
        return true;
    });
    c.validate();
    return c;
}

inline json to_json(const PreprocConfig& c) {
    json w = json::array();
    for (Window x : c.window) w.push_back(detail::window_name(x));
    return {{"range_start", c.range_start}, {"range_len", c.range_len}, {"az_pad", c.az_pad},
            {"el_pad", c.el_pad},           {"K", c.K},                 {"window", w}};
}

inline PreprocConfig preproc_config_from_json(const json& j) {
    PreprocConfig c;
    detail::read_section(j, "preproc", [&](const std::string& k, const json& v) {
        if (k == "range_start") c.range_start = v.get<std::size_t>();
        else if (k == "range_len") c.range_len = v.get<std::size_t>();
        else if (k == "az_pad") c.az_pad = v.get<std::size_t>();
        else if (k == "el_pad") c.el_pad = v.get<std::size_t>();
        else if (k == "K") c.K = v.get<std::size_t>();
        else if (k == "window") {
            if (!v.is_array() || v.size() != 4) throw Error("preproc: window needs 4 entries (adc, chirp, az, el)");
            for (std::size_t i = 0; i < 4; ++i) c.window[i] = detail::parse_window(v[i].get<std::string>());
        } else return false;
        return true;
    });
    return c;
}

// Randomized scene parameters for generated training data.  Each sequence
// draws its script and motion from a generator seeded by (seed, sequence id).
struct DatasetConfig {
    std::size_t sequences = 20;
    double duration = 15.0;  // seconds per sequence
    std::uint64_t seed = 0;
    std::optional<double> snr_db = 20.0;
    std::vector<std::string> scripts{kMotionScripts.begin(), kMotionScripts.end()};
    double period_min = 1.0, period_max = 1.6;
    double amplitude_min = 0.8, amplitude_max = 1.2;
    double lateral_max = 0.2;
    double depth_min = 3.2, depth_max = 3.3;
    std::size_t test_sequences = 4;  // the last ones are held out

    void validate() const {
        if (sequences == 0 || !(duration > 0)) throw Error("dataset: need at least one sequence of positive length");
        if (test_sequences >= sequences) throw Error("dataset: test_sequences must leave training sequences");
        if (scripts.empty()) throw Error("dataset: no motion scripts");
        for (const auto& s : scripts)
            if (std::find(kMotionScripts.begin(), kMotionScripts.end(), s) == kMotionScripts.end())
                throw Error("dataset: unknown motion script '" + s + "'");
        if (!(period_min > 0) || period_max < period_min || amplitude_max < amplitude_min || depth_max < depth_min ||
            lateral_max < 0)
            throw Error("dataset: inverted or invalid parameter range");
    }
};

inline json to_json(const DatasetConfig& c) {
    return {{"sequences", c.sequences},
            {"duration", c.duration},
            {"seed", c.seed},
            {"snr_db", c.snr_db ? json(*c.snr_db) : json(nullptr)},
            {"scripts", c.scripts},
            {"period_min", c.period_min},
            {"period_max", c.period_max},
            {"amplitude_min", c.amplitude_min},
            {"amplitude_max", c.amplitude_max},
            {"lateral_max", c.lateral_max},
            {"depth_min", c.depth_min},
            {"depth_max", c.depth_max},
            {"test_sequences", c.test_sequences}};
}

inline DatasetConfig dataset_config_from_json(const json& j) {
    DatasetConfig c;
    detail::read_section(j, "dataset", [&](const std::string& k, const json& v) {
        if (k == "sequences") c.sequences = v.get<std::size_t>();
        else if (k == "duration") c.duration = v.get<double>();
        else if (k == "seed") c.seed = v.get<std::uint64_t>();
        else if (k == "snr_db") c.snr_db = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
        else if (k == "scripts") c.scripts = v.get<std::vector<std::string>>();
        else if (k == "period_min") c.period_min = v.get<double>();
        else if (k == "period_max") c.period_max = v.get<double>();
        else if (k == "amplitude_min") c.amplitude_min = v.get<double>();
        else if (k == "amplitude_max") c.amplitude_max = v.get<double>();
        else if (k == "lateral_max") c.lateral_max = v.get<double>();
        else if (k == "depth_min") c.depth_min = v.get<double>();
        else if (k == "depth_max") c.depth_max = v.get<double>();
        else if (k == "test_sequences") c.test_sequences = v.get<std::size_t>();
        else return false;
        return true;
    });
    c.validate();
    return c;
}

struct TrainOptions {
    std::size_t steps = 1500;
    std::size_t batch = 4;
    double lr = 1e-3;
    double weight_decay = 1e-4;
    double decay_factor = 0.999;
    std::size_t decay_every = 2000;
    std::uint64_t seed = 0;  // batch order
    bool check_finite = true;

    void validate() const {
        if (steps == 0 || batch == 0) throw Error("train: steps and batch must be positive");
        if (!(lr > 0) || weight_decay < 0 || !(decay_factor > 0) || decay_every == 0)
            throw Error("train: invalid optimizer settings");
    }
};

inline json to_json(const TrainOptions& o) {
    return {{"steps", o.steps},
            {"batch", o.batch},
            {"lr", o.lr},
            {"weight_decay", o.weight_decay},
            {"decay_factor", o.decay_factor},
            {"decay_every", o.decay_every},
            {"seed", o.seed},
            {"check_finite", o.check_finite}};
}

inline TrainOptions train_options_from_json(const json& j) {
    TrainOptions o;
    detail::read_section(j, "train", [&](const std::string& k, const json& v) {
        if (k == "steps") o.steps = v.get<std::size_t>();
        else if (k == "batch") o.batch = v.get<std::size_t>();
        else if (k == "lr") o.lr = v.get<double>();
        else if (k == "weight_decay") o.weight_decay = v.get<double>();
        else if (k == "decay_factor") o.decay_factor = v.get<double>();
        else if (k == "decay_every") o.decay_every = v.get<std::size_t>();
        else if (k == "seed") o.seed = v.get<std::uint64_t>();
        else if (k == "check_finite") o.check_finite = v.get<bool>();
        else return false;
        return true;
    });
    o.validate();
    return o;
}

// Everything an experiment needs besides its data directories.
struct RunConfig {
    RadarConfig radar;
    PreprocConfig preproc;
    DatasetConfig dataset;
    ModelConfig model;
    TrainOptions train;

    // The desk-scale profile: 32 range bins x 32 azimuth bins, two encoder
    // scales, narrow channels.
    static RunConfig reduced() {
        RunConfig r;
        r.preproc.range_start = 48;
        r.preproc.range_len = 32;
        r.preproc.az_pad = 32;
        r.preproc.el_pad = 8;
        r.model.H = 32;
        r.model.W = 32;
        r.model.S = 2;
        r.model.D = 4;
        return r;
    }

    // Cross-section consistency: the model input must match the maps.
    void validate() const {
        radar.validate();
        preproc.validate(radar.cube_shape());
        dataset.validate();
        model.validate();
        train.validate();
        if (model.H != preproc.range_len || model.W != preproc.az_pad)
            throw Error("config: model H x W (" + std::to_string(model.H) + " x " + std::to_string(model.W) +
                        ") must equal preproc range_len x az_pad (" + std::to_string(preproc.range_len) + " x " +
                        std::to_string(preproc.az_pad) + ")");
        if (model.K != preproc.K)
            throw Error("config: model K = " + std::to_string(model.K) + " differs from preproc K = " +
                        std::to_string(preproc.K));
    }
};

inline json to_json(const RunConfig& r) {
    return {{"radar", to_json(r.radar)},
            {"preproc", to_json(r.preproc)},
            {"dataset", to_json(r.dataset)},
            {"model", to_json(r.model)},
            {"train", to_json(r.train)}};
}

inline RunConfig profile_config(const std::string& name) {
    if (name == "full") return RunConfig{};
    if (name == "reduced") return RunConfig::reduced();
    throw Error("config: unknown profile '" + name + "' (expected full or reduced)");
}

// Sections absent from `j` come from `base`, or from the named profile when
// `j` has a "profile" key.
inline RunConfig run_config_from_json(const json& j, const RunConfig& base_in = RunConfig{}) {
    if (!j.is_object()) throw Error("config: expected a JSON object");
    if (j.contains("profile") && !j.at("profile").is_string()) throw Error("config: profile must be a string");
    const RunConfig base = j.contains("profile") ? profile_config(j.at("profile").get<std::string>()) : base_in;
    RunConfig r = base;
    detail::read_section(j, "config", [&](const std::string& k, const json& v) {
        if (k == "profile") return true;
        // User keys are laid over the base section, so an unknown key still
        // reaches the section reader and is rejected there.
        auto merged = [&](json m) {
            if (!v.is_object()) throw Error("config: section '" + k + "' must be an object");
            for (const auto& [kk, vv] : v.items()) m[kk] = vv;
            return m;
        };
        if (k == "radar") r.radar = radar_config_from_json(merged(to_json(base.radar)));
        else if (k == "preproc") r.preproc = preproc_config_from_json(merged(to_json(base.preproc)));
        else if (k == "dataset") r.dataset = dataset_config_from_json(merged(to_json(base.dataset)));
        else if (k == "model") r.model = model_config_from_json(merged(to_json(base.model)));
        else if (k == "train") r.train = train_options_from_json(merged(to_json(base.train)));
        else return false;
        return true;
    });
    r.validate();
    return r;
}

}  // namespace radpose
