#pragma once

// Model checkpoints:
//   "RDPSCKPT", u32 version, u32 json length + JSON {model, meta},
//   u32 tensor count, per tensor: u32 name length + name, u32 rank, u32 dims,
//   f32 payload; u64 training step.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "radpose/io.hpp"
#include "radpose/model.hpp"

namespace radpose {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelConfig config;
    nlohmann::json meta = nlohmann::json::object();  // training options, log, data description
    std::vector<std::pair<std::string, Tensor<float>>> tensors;
    std::uint64_t step = 0;
};

template <class T>
Checkpoint make_checkpoint(const PoseModel<T>& m, std::uint64_t step, nlohmann::json meta = nlohmann::json::object()) {
    Checkpoint c;
    c.config = m.config();
    c.meta = std::move(meta);
    c.step = step;
    for (const auto& t : m.tensors()) {
        Tensor<float> f(t.tensor.shape());
        auto src = t.tensor.data();
        std::transform(src.begin(), src.end(), f.data().begin(), [](T v) { return static_cast<float>(v); });
        c.tensors.emplace_back(t.name, f);
    }
    return c;
}

inline std::vector<char> encode_checkpoint(const Checkpoint& c) {
    io::Writer w;
    w.bytes("RDPSCKPT", 8);
    w.put(kCheckpointVersion);
    const std::string j = nlohmann::json{{"model", to_json(c.config)}, {"meta", c.meta}}.dump();
    w.str(j);
    w.put(static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto& [name, t] : c.tensors) {
        w.str(name);
        w.put(static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) w.put(static_cast<std::uint32_t>(d));
        w.bytes(t.data().data(), t.numel() * sizeof(float));
    }
    w.put(c.step);
    return w.buffer();
}

inline Checkpoint decode_checkpoint(std::vector<char> bytes, const std::string& what = "checkpoint") {
    io::Reader r(std::move(bytes), what);
    r.expect_magic("RDPSCKPT");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw FormatError(what + ": version mismatch (file " + std::to_string(version) + ")");
    Checkpoint c;
    try {
        const auto j = nlohmann::json::parse(r.str());
        c.config = model_config_from_json(j.at("model"));
        c.meta = j.at("meta");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(what + ": bad header: " + e.what());
    }
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
        std::string name = r.str();
        const auto rank = r.get<std::uint32_t>();
        if (rank > 8) throw FormatError(what + ": tensor '" + name + "' has rank " + std::to_string(rank));
        Shape shape(rank);
        for (auto& d : shape) d = r.get<std::uint32_t>();
        Tensor<float> t(shape);
        r.bytes(t.data().data(), t.numel() * sizeof(float));
        c.tensors.emplace_back(std::move(name), std::move(t));
    }
    c.step = r.get<std::uint64_t>();
    r.expect_end();
    return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    io::write_file(path, encode_checkpoint(c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(io::read_file(path), path.string());
}

// Copies stored values into a model built from the same config.  Names and
// shapes must match one to one.
template <class T>
void restore(PoseModel<T>& m, const Checkpoint& c) {
    auto& ts = m.tensors();
    if (ts.size() != c.tensors.size())
        throw FormatError("checkpoint holds " + std::to_string(c.tensors.size()) + " tensors, model has " +
                          std::to_string(ts.size()));
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto& [name, src] = c.tensors[i];
        if (name != ts[i].name || src.shape() != ts[i].tensor.shape())
            throw FormatError("checkpoint tensor '" + name + "' " + shape_str(src.shape()) + " does not match model '" +
                              ts[i].name + "' " + shape_str(ts[i].tensor.shape()));
        auto dst = ts[i].tensor.data();
        std::transform(src.data().begin(), src.data().end(), dst.begin(), [](float v) { return static_cast<T>(v); });
    }
}

template <class T>
PoseModel<T> model_from_checkpoint(const Checkpoint& c) {
    PoseModel<T> m(c.config);
    restore(m, c);
    m.set_training(false);
    return m;
}

}  // namespace radpose
